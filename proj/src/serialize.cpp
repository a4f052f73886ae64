#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "kryptolab/error.hpp"
#include "kryptolab/network.hpp"
#include "json.hpp"

namespace kryptolab::gradnet {
namespace {

constexpr std::array<char, 8> kMagic{'K', 'L', 'G', 'N', 'E', 'T', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}
  std::uint8_t u8() {
    const int c = in_.get();
    if (c == EOF) throw Error(ErrorCode::BadFormat, name_ + ": truncated network container");
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::istream& in_;
  std::string name_;
};

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p += ".json";
  return p;
}

}  // namespace

void save(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  const Shape3 in = net.input_shape();
  w.i32(in.channels);
  w.i32(in.height);
  w.i32(in.width);
  w.u64(net.seed());
  w.u32(static_cast<std::uint32_t>(net.specs().size()));
  for (const auto& s : net.specs()) {
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.i32(s.out_channels);
    w.i32(s.kernel);
    w.u8(static_cast<std::uint8_t>(s.padding));
    w.i32(s.stride);
    w.i32(s.window);
    w.f64(s.rate);
    w.i32(s.width);
    w.f64(s.temperature);
  }
  for (const auto& lp : net.params()) {
    w.u64(lp.weight.size());
    for (double v : lp.weight.data) w.f32(static_cast<float>(v));
    w.u64(lp.bias.size());
    for (double v : lp.bias.data) w.f32(static_cast<float>(v));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());

  nlohmann::json meta;
  meta["format"] = "kryptolab-network";
  meta["version"] = kVersion;
  meta["input_shape"] = {in.channels, in.height, in.width};
  meta["parameter_count"] = net.parameter_count();
  meta["seed"] = net.seed();
  auto& layers = meta["layers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.specs().size(); ++i) {
    const Shape3 o = net.shapes()[i + 1];
    nlohmann::json layer{{"kind", to_string(net.specs()[i].kind)}, {"output_shape", {o.channels, o.height, o.width}}};
    if (!net.params()[i].weight.shape.empty()) {
      layer["weight_shape"] = net.params()[i].weight.shape;
      layer["bias_shape"] = net.params()[i].bias.shape;
    }
    layers.push_back(std::move(layer));
  }
  std::ofstream side(sidecar_path(path));
  if (!side) throw Error(ErrorCode::IoError, "cannot write sidecar for " + path.string());
  side << meta.dump(2) << '\n';
}

Network load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::BadFormat, path.string() + ": not a network container");
  Reader r(in, path.string());
  if (const auto v = r.u32(); v != kVersion) {
    throw Error(ErrorCode::BadFormat, path.string() + ": unsupported version " + std::to_string(v));
  }
  Shape3 shape;
  shape.channels = r.i32();
  shape.height = r.i32();
  shape.width = r.i32();
  const std::uint64_t seed = r.u64();
  const std::uint32_t n = r.u32();
  if (n == 0 || n > 4096) throw Error(ErrorCode::BadFormat, path.string() + ": implausible layer count");
  std::vector<LayerSpec> specs(n);
  for (auto& s : specs) {
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::Softmax)) throw Error(ErrorCode::BadFormat, "unknown layer kind");
    s.kind = static_cast<LayerKind>(kind);
    s.out_channels = r.i32();
    s.kernel = r.i32();
    s.padding = static_cast<Padding>(r.u8());
    s.stride = r.i32();
    s.window = r.i32();
    s.rate = r.f64();
    s.width = r.i32();
    s.temperature = r.f64();
  }
  Network net = Network::build(std::move(specs), shape, seed);
  for (auto& lp : net.params()) {
    for (Tensor* t : {&lp.weight, &lp.bias}) {
      if (r.u64() != t->size()) throw Error(ErrorCode::BadFormat, path.string() + ": parameter blob size mismatch");
      for (auto& v : t->data) v = static_cast<double>(r.f32());
    }
  }
  return net;
}

}  // namespace kryptolab::gradnet
