#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kryptolab/image.hpp"

namespace kryptolab::imagekit {

/// Normalized intensity histogram with the cumulative moments needed for
/// Otsu's method. Index t of the moment arrays describes the split where
/// class 0 holds bins [0, t) and class 1 holds bins [t, L).
struct Histogram {
  int bins = 0;
  std::size_t total = 0;
  std::vector<std::size_t> counts;
  std::vector<double> p;

  // Moments, each of length bins + 1.
  std::vector<double> omega0;
  std::vector<double> omega1;
  std::vector<double> mu0;
  std::vector<double> mu1;
  double mu_total = 0.0;

  double between_class_variance(int t) const;
  double within_class_variance(int t) const;
  double total_variance() const;
  int nonempty_bins() const;
};

struct Kernel {
  int size = 5;
  std::vector<std::uint8_t> weights;  // size * size, row-major

  static Kernel box(int size);
  int anchor() const { return size / 2; }
  bool at(int r, int c) const { return weights[static_cast<std::size_t>(r) * size + c] != 0; }
};

enum class BorderKind { Outer, Hole };

struct Point {
  int row = 0;
  int col = 0;
  auto operator<=>(const Point&) const = default;
};

struct Contour {
  std::vector<Point> points;
  BorderKind kind = BorderKind::Outer;
  std::optional<std::size_t> parent;  // index into the returned contour list
  int label = 0;
};

struct RoiOptions {
  int bins = 256;
  int kernel_size = 5;
  bool invert = false;  // treat dark regions as foreground
};

GrayImage to_grayscale(const Image& img, int bins = 256);
Histogram compute_histogram(const GrayImage& g);

/// Argmax of the between-class variance, smallest t on ties. Throws
/// DegenerateImage when fewer than two bins are populated.
int otsu_threshold(const Histogram& h);

/// Foreground iff intensity >= t.
BinaryMask binarize(const GrayImage& g, int t);
BinaryMask dilate(const BinaryMask& m, const Kernel& k);

/// Suzuki-Abe border following: 8-connected foreground, 4-connected holes.
std::vector<Contour> trace_borders(const BinaryMask& m);

/// Pixels of `m`'s 8-connected component containing `seed` together with
/// everything that component encloses.
BinaryMask fill_component(const BinaryMask& m, Point seed);

RoIMask roi_mask(const Image& img, const RoiOptions& opts = {});
RoIMask roi_mask(const Image& img, const Kernel& k);

Image apply_mask(const Image& img, const RoIMask& m);

}  // namespace kryptolab::imagekit
