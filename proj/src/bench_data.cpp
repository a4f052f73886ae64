#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"
#include "kryptolab/bench.hpp"
#include "kryptolab/error.hpp"
#include "kryptolab/pnm.hpp"

namespace kryptolab::bench {

namespace {

using json = nlohmann::json;

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

struct Ellipse {
  double cy, cx, a, b, theta;
  bool contains(double r, double c) const {
    const double dy = r - cy;
    const double dx = c - cx;
    const double u = (dx * std::cos(theta) + dy * std::sin(theta)) / a;
    const double v = (-dx * std::sin(theta) + dy * std::cos(theta)) / b;
    return u * u + v * v <= 1.0;
  }
};

SynthSample make_sample(int index, int size, std::uint64_t seed, int channels) {
  std::mt19937_64 rng(splitmix(seed ^ splitmix(static_cast<std::uint64_t>(index))));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double s = size;

  const double fx = 0.2 + 0.4 * unit(rng), fy = 0.2 + 0.4 * unit(rng);
  const double px = 2.0 * std::numbers::pi * unit(rng), py = 2.0 * std::numbers::pi * unit(rng);
  const Ellipse blob{s * (0.35 + 0.3 * unit(rng)), s * (0.35 + 0.3 * unit(rng)), s * (0.22 + 0.1 * unit(rng)),
                     s * (0.22 + 0.1 * unit(rng)), std::numbers::pi * unit(rng)};
  const int label = index % 2;
  const double minor = std::min(blob.a, blob.b);
  const double off = 0.25 * minor * unit(rng);
  const double ang = 2.0 * std::numbers::pi * unit(rng);
  const double radius = minor * (0.3 + 0.15 * unit(rng));
  const Ellipse core{blob.cy + off * std::sin(ang), blob.cx + off * std::cos(ang), radius, radius, 0.0};

  static constexpr double kTint[3] = {1.0, 0.9, 0.8};
  SynthSample out;
  out.label = label;
  out.image = Image(size, size, channels, 0.0);
  out.blob = BinaryMask(size, size, false);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      double v = 0.15 + 0.03 * std::sin(fx * c + px) * std::cos(fy * r + py) + 0.02 * noise(rng);
      if (blob.contains(r, c)) {
        out.blob.set(r, c, true);
        v = 0.75 + 0.03 * noise(rng);
        if (label == 1 && core.contains(r, c)) v = 0.35 + 0.03 * noise(rng);
      }
      for (int ch = 0; ch < channels; ++ch) out.image.at(r, c, ch) = quantize(v * (channels == 3 ? kTint[ch] : 1.0));
    }
  }
  return out;
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu%s", stem, i, ext);
  return buf;
}

}  // namespace

std::vector<SynthSample> synth_samples(int n, int size, std::uint64_t seed, int channels) {
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "synthetic dataset needs at least 4 images");
  if (size < 32) throw Error(ErrorCode::InvalidArgument, "synthetic images must be at least 32 pixels wide");
  if (channels != 1 && channels != 3) throw Error(ErrorCode::InvalidArgument, "channels must be 1 or 3");
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(make_sample(i, size, seed, channels));
  return out;
}

DatasetManifest synth_dataset(int n, int size, std::uint64_t seed, const fs::path& out_dir, int channels) {
  const auto samples = synth_samples(n, size, seed, channels);
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "rois");
  DatasetManifest m;
  m.root = out_dir;
  m.seed = seed;
  const char* ext = channels == 3 ? ".ppm" : ".pgm";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ManifestEntry e{"images/" + numbered("img", i, ext), samples[i].label, "rois/" + numbered("roi", i, ".pgm")};
    pnm::write_image(out_dir / e.image, samples[i].image);
    pnm::write_mask(out_dir / e.roi, samples[i].blob);
    m.entries.push_back(std::move(e));
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  json j;
  // Stored relative to the manifest so the directory can move.
  const auto base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  j["root"] = fs::weakly_canonical(m.root).lexically_relative(fs::weakly_canonical(base)).generic_string();
  j["seed"] = m.seed;
  j["split"] = {{"train", m.split.train}, {"val", m.split.val}, {"test", m.split.test}};
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    json row = {{"image", e.image}, {"label", e.label}};
    if (!e.roi.empty()) row["roi"] = e.roi;
    j["entries"].push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadFormat, path.string() + ": " + e.what());
  }
  try {
    DatasetManifest m;
    const fs::path root = j.value("root", std::string("."));
    m.root = root.is_absolute() ? root : path.parent_path() / root;
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("split")) {
      const auto& s = j.at("split");
      m.split = {s.value("train", 0.7), s.value("val", 0.05), s.value("test", 0.25)};
    }
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.image = e.at("image").get<std::string>();
      if (!e.at("label").is_number_integer()) {
        throw Error(ErrorCode::BadLabel, path.string() + ": entry " + entry.image + " has a non-integer label");
      }
      entry.label = e.at("label").get<int>();
      entry.roi = e.value("roi", std::string());
      m.entries.push_back(std::move(entry));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadFormat, path.string() + ": " + e.what());
  }
}

Split split_indices(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n))));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

std::vector<Image> Dataset::images_of(const std::vector<std::size_t>& idx) const {
  std::vector<Image> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(images[i]);
  return out;
}

std::vector<int> Dataset::labels_of(const std::vector<std::size_t>& idx) const {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labels[i]);
  return out;
}

Dataset load_dataset(const fs::path& manifest_path) {
  const auto m = read_manifest(manifest_path);
  if (m.entries.empty()) throw Error(ErrorCode::EmptyDataset, manifest_path.string() + ": no entries");
  Dataset d;
  const bool with_roi =
      std::all_of(m.entries.begin(), m.entries.end(), [](const ManifestEntry& e) { return !e.roi.empty(); });
  for (const auto& e : m.entries) {
    if (e.label != 0 && e.label != 1) {
      throw Error(ErrorCode::BadLabel, e.image + ": label " + std::to_string(e.label) + " is not 0 or 1");
    }
    Image img = pnm::read_image(m.root / e.image);
    if (!d.images.empty() && !img.same_shape(d.images.front())) {
      throw Error(ErrorCode::BadFormat, e.image + ": image shape differs from the first entry");
    }
    if (with_roi) {
      BinaryMask roi = pnm::read_mask(m.root / e.roi);
      if (roi.height != img.height || roi.width != img.width) {
        throw Error(ErrorCode::BadFormat, e.roi + ": mask shape differs from its image");
      }
      d.rois.push_back(std::move(roi));
    }
    d.images.push_back(std::move(img));
    d.labels.push_back(e.label);
  }
  d.split = split_indices(d.images.size(), m.split, m.seed);
  return d;
}

Dataset dataset_from_samples(const std::vector<SynthSample>& samples, const SplitFractions& f, std::uint64_t seed) {
  Dataset d;
  for (const auto& s : samples) {
    d.images.push_back(s.image);
    d.labels.push_back(s.label);
    d.rois.push_back(s.blob);
  }
  d.split = split_indices(d.images.size(), f, seed);
  return d;
}

}  // namespace kryptolab::bench
