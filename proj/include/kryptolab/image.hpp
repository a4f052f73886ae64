#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace kryptolab {

/// H x W x C pixel grid, row-major with interleaved channels, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(int r, int col, int ch = 0) const {
    return (static_cast<std::size_t>(r) * width + col) * channels + ch;
  }
  double& at(int r, int col, int ch = 0) { return data[index(r, col, ch)]; }
  double at(int r, int col, int ch = 0) const { return data[index(r, col, ch)]; }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const Image&) const = default;
};

/// Throws InvalidArgument unless the length and [0,1] range invariants hold.
void validate(const Image& img);

/// Intensities quantized to `levels` bins.
struct GrayImage {
  int height = 0;
  int width = 0;
  int levels = 256;
  std::vector<int> data;

  int at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
  bool operator==(const GrayImage&) const = default;
};

/// Boolean H x W grid. Stored as bytes so spans of it are addressable.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int h, int w, bool fill = false)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

  bool at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c] != 0; }
  void set(int r, int c, bool v) { data[static_cast<std::size_t>(r) * width + c] = v ? 1 : 0; }
  bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < height && c < width; }
  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;
};

/// Region of interest: a filled mask plus its pixel count.
struct RoIMask {
  BinaryMask mask;
  std::size_t area = 0;

  int height() const { return mask.height; }
  int width() const { return mask.width; }
  bool at(int r, int c) const { return mask.at(r, c); }

  static RoIMask from_mask(BinaryMask m) {
    RoIMask out{std::move(m), 0};
    out.area = out.mask.count();
    return out;
  }
  static RoIMask full(int h, int w) { return from_mask(BinaryMask(h, w, true)); }
};

}  // namespace kryptolab
