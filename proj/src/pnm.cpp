#include "kryptolab/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "kryptolab/error.hpp"

namespace kryptolab::pnm {
namespace {

Error bad_format(const std::filesystem::path& path, const std::string& why) {
  return Error(ErrorCode::BadFormat, path.string() + ": " + why);
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
  std::string tok;
  int ch = 0;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw bad_format(path, "truncated header");
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in, path);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); })) {
    throw bad_format(path, "expected integer in header, found '" + tok + "'");
  }
  return std::stoi(tok);
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

struct Raw {
  int width = 0;
  int height = 0;
  int channels = 0;
  int maxval = 0;
  std::vector<std::uint8_t> bytes;
};

Raw read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  const std::string magic = header_token(in, path);
  Raw raw;
  if (magic == "P5") {
    raw.channels = 1;
  } else if (magic == "P6") {
    raw.channels = 3;
  } else {
    throw bad_format(path, "unsupported magic '" + magic + "'");
  }
  raw.width = header_int(in, path);
  raw.height = header_int(in, path);
  raw.maxval = header_int(in, path);
  if (raw.width <= 0 || raw.height <= 0) throw bad_format(path, "non-positive dimensions");
  if (raw.maxval <= 0 || raw.maxval > 255) throw bad_format(path, "only 8-bit maxval is supported");
  raw.bytes.resize(static_cast<std::size_t>(raw.width) * raw.height * raw.channels);
  in.read(reinterpret_cast<char*>(raw.bytes.data()), static_cast<std::streamsize>(raw.bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.bytes.size())) throw bad_format(path, "truncated pixel data");
  return raw;
}

void write_raw(const std::filesystem::path& path, int w, int h, int channels, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << (channels == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const Raw raw = read_raw(path);
  Image img(raw.height, raw.width, raw.channels);
  for (std::size_t i = 0; i < raw.bytes.size(); ++i) {
    img.data[i] = std::min(1.0, raw.bytes[i] / static_cast<double>(raw.maxval));
  }
  return img;
}

void write_image(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error(ErrorCode::InvalidArgument, "PNM output needs 1 or 3 channels");
  }
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  write_raw(path, img.width, img.height, img.channels, bytes);
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> bytes(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), bytes.begin(), [](auto v) { return v ? 255 : 0; });
  write_raw(path, mask.width, mask.height, 1, bytes);
}

BinaryMask read_mask(const std::filesystem::path& path) {
  const Raw raw = read_raw(path);
  if (raw.channels != 1) throw bad_format(path, "mask must be a P5 image");
  BinaryMask m(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.bytes.size(); ++i) m.data[i] = raw.bytes[i] ? 1 : 0;
  return m;
}

}  // namespace kryptolab::pnm
