#include "kryptolab/imagekit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <string>

#include "kryptolab/error.hpp"

namespace kryptolab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::NoContour: return "NoContour";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
    case ErrorCode::EmptyRoI: return "EmptyRoI";
    case ErrorCode::ZeroImage: return "ZeroImage";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::BadLabel: return "BadLabel";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void validate(const Image& img) {
  if (img.height <= 0 || img.width <= 0 || (img.channels != 1 && img.channels != 3)) {
    throw Error(ErrorCode::InvalidArgument, "image must be HxWx1 or HxWx3 with positive extent");
  }
  if (img.data.size() != static_cast<std::size_t>(img.height) * img.width * img.channels) {
    throw Error(ErrorCode::InvalidArgument, "image data length does not match its shape");
  }
  for (double v : img.data) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "pixel value outside [0,1]");
    }
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

namespace imagekit {

Kernel Kernel::box(int size) {
  if (size < 1 || size % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "kernel size must be odd and positive, got " + std::to_string(size));
  }
  Kernel k;
  k.size = size;
  k.weights.assign(static_cast<std::size_t>(size) * size, 1);
  return k;
}

GrayImage to_grayscale(const Image& img, int bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "histogram needs at least 2 bins");
  GrayImage g{img.height, img.width, bins, {}};
  g.data.resize(static_cast<std::size_t>(img.height) * img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      double sum = 0.0;
      for (int ch = 0; ch < img.channels; ++ch) sum += img.at(r, c, ch);
      const double mean = sum / img.channels;
      const int q = static_cast<int>(std::floor(mean * (bins - 1) + 0.5));
      g.data[static_cast<std::size_t>(r) * img.width + c] = std::clamp(q, 0, bins - 1);
    }
  }
  return g;
}

Histogram compute_histogram(const GrayImage& g) {
  Histogram h;
  h.bins = g.levels;
  h.total = g.data.size();
  h.counts.assign(h.bins, 0);
  for (int v : g.data) {
    if (v < 0 || v >= h.bins) throw Error(ErrorCode::InvalidArgument, "gray level out of range");
    ++h.counts[v];
  }
  if (h.total == 0) throw Error(ErrorCode::DegenerateImage, "empty image");

  h.p.resize(h.bins);
  for (int i = 0; i < h.bins; ++i) h.p[i] = static_cast<double>(h.counts[i]) / static_cast<double>(h.total);

  h.mu_total = 0.0;
  for (int i = 0; i < h.bins; ++i) h.mu_total += i * h.p[i];

  const auto n = static_cast<std::size_t>(h.bins) + 1;
  h.omega0.assign(n, 0.0);
  h.omega1.assign(n, 0.0);
  h.mu0.assign(n, 0.0);
  h.mu1.assign(n, 0.0);
  double w0 = 0.0;
  double s0 = 0.0;
  for (int t = 0; t <= h.bins; ++t) {
    if (t > 0) {
      w0 += h.p[t - 1];
      s0 += (t - 1) * h.p[t - 1];
    }
    const double w1 = 1.0 - w0;
    h.omega0[t] = w0;
    h.omega1[t] = w1;
    h.mu0[t] = w0 > 0.0 ? s0 / w0 : 0.0;
    h.mu1[t] = w1 > 1e-15 ? (h.mu_total - s0) / w1 : 0.0;
  }
  return h;
}

double Histogram::between_class_variance(int t) const {
  const double w0 = omega0[t];
  const double w1 = omega1[t];
  if (w0 <= 0.0 || w1 <= 1e-15) return 0.0;
  const double d = mu0[t] - mu1[t];
  return w0 * w1 * d * d;
}

double Histogram::within_class_variance(int t) const {
  double v0 = 0.0;
  double v1 = 0.0;
  for (int i = 0; i < bins; ++i) {
    if (i < t) {
      v0 += (i - mu0[t]) * (i - mu0[t]) * p[i];
    } else {
      v1 += (i - mu1[t]) * (i - mu1[t]) * p[i];
    }
  }
  // omega_k * sigma_k^2 == sum over the class of (i - mu_k)^2 p(i)
  return v0 + v1;
}

double Histogram::total_variance() const {
  double v = 0.0;
  for (int i = 0; i < bins; ++i) v += (i - mu_total) * (i - mu_total) * p[i];
  return v;
}

int Histogram::nonempty_bins() const {
  return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
}

int otsu_threshold(const Histogram& h) {
  if (h.nonempty_bins() < 2) {
    throw Error(ErrorCode::DegenerateImage, "a single intensity level cannot be split into two classes");
  }
  // Running class probability and first moment of class 0 = bins [0, t).
  double w0 = 0.0;
  double s0 = 0.0;
  double best = -1.0;
  int best_t = 1;
  for (int t = 1; t < h.bins; ++t) {
    w0 += h.p[t - 1];
    s0 += (t - 1) * h.p[t - 1];
    const double w1 = 1.0 - w0;
    double var = 0.0;
    if (w0 > 0.0 && w1 > 1e-15) {
      const double m0 = s0 / w0;
      const double m1 = (h.mu_total - s0) / w1;
      var = w0 * w1 * (m0 - m1) * (m0 - m1);
    }
    // Relative slack so plateaus over empty bins resolve to the smallest t.
    if (var > best + 1e-12 * std::max(best, 0.0)) {
      best = var;
      best_t = t;
    }
  }
  return best_t;
}

BinaryMask binarize(const GrayImage& g, int t) {
  BinaryMask m(g.height, g.width);
  for (std::size_t i = 0; i < g.data.size(); ++i) m.data[i] = g.data[i] >= t ? 1 : 0;
  return m;
}

BinaryMask dilate(const BinaryMask& m, const Kernel& k) {
  if (k.size < 1 || k.size % 2 == 0) throw Error(ErrorCode::InvalidArgument, "kernel size must be odd");
  const int a = k.anchor();
  BinaryMask out(m.height, m.width);
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      bool hit = false;
      for (int kr = 0; kr < k.size && !hit; ++kr) {
        const int rr = r + kr - a;
        if (rr < 0 || rr >= m.height) continue;
        for (int kc = 0; kc < k.size; ++kc) {
          const int cc = c + kc - a;
          if (cc < 0 || cc >= m.width || !k.at(kr, kc)) continue;
          if (m.at(rr, cc)) {
            hit = true;
            break;
          }
        }
      }
      out.set(r, c, hit);
    }
  }
  return out;
}

namespace {

// Clockwise with rows growing downward: E, SE, S, SW, W, NW, N, NE.
constexpr std::array<int, 8> kDr{0, 1, 1, 1, 0, -1, -1, -1};
constexpr std::array<int, 8> kDc{1, 1, 0, -1, -1, -1, 0, 1};

int direction_of(int dr, int dc) {
  for (int d = 0; d < 8; ++d) {
    if (kDr[d] == dr && kDc[d] == dc) return d;
  }
  return -1;
}

struct BorderInfo {
  BorderKind kind;
  int parent;  // NBD of the parent border, 0 for none
};

}  // namespace

std::vector<Contour> trace_borders(const BinaryMask& m) {
  const int H = m.height + 2;
  const int W = m.width + 2;
  std::vector<int> f(static_cast<std::size_t>(H) * W, 0);
  auto F = [&](int r, int c) -> int& { return f[static_cast<std::size_t>(r) * W + c]; };
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) F(r + 1, c + 1) = m.at(r, c) ? 1 : 0;

  // NBD 1 is the frame, which behaves as a hole border.
  std::vector<BorderInfo> info{{BorderKind::Hole, 0}, {BorderKind::Hole, 0}};
  std::vector<Contour> contours;
  int nbd = 1;

  for (int i = 1; i < H - 1; ++i) {
    int lnbd = 1;
    for (int j = 1; j < W - 1; ++j) {
      const int fij = F(i, j);
      int i2 = 0;
      int j2 = 0;
      BorderKind kind;
      if (fij == 1 && F(i, j - 1) == 0) {
        kind = BorderKind::Outer;
        i2 = i;
        j2 = j - 1;
      } else if (fij >= 1 && F(i, j + 1) == 0) {
        kind = BorderKind::Hole;
        i2 = i;
        j2 = j + 1;
        if (fij > 1) lnbd = fij;
      } else {
        if (fij != 1) lnbd = std::abs(fij);
        continue;
      }
      ++nbd;

      const BorderInfo& prev = info[lnbd];
      int parent = 0;
      if (kind == BorderKind::Outer) {
        parent = prev.kind == BorderKind::Outer ? prev.parent : lnbd;
      } else {
        parent = prev.kind == BorderKind::Outer ? lnbd : prev.parent;
      }
      info.push_back({kind, parent});

      Contour contour;
      contour.kind = kind;
      contour.label = nbd;

      // Step 3.1: clockwise search from (i2, j2) for a nonzero neighbour.
      const int start_dir = direction_of(i2 - i, j2 - j);
      int i1 = -1;
      int j1 = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (start_dir + k) % 8;
        if (F(i + kDr[d], j + kDc[d]) != 0) {
          i1 = i + kDr[d];
          j1 = j + kDc[d];
          break;
        }
      }
      if (i1 < 0) {
        F(i, j) = -nbd;
        contour.points.push_back({i - 1, j - 1});
      } else {
        i2 = i1;
        j2 = j1;
        int i3 = i;
        int j3 = j;
        while (true) {
          contour.points.push_back({i3 - 1, j3 - 1});
          // Step 3.3: counterclockwise search starting after (i2, j2).
          const int from = direction_of(i2 - i3, j2 - j3);
          bool east_zero_examined = false;
          int i4 = -1;
          int j4 = -1;
          for (int k = 1; k <= 8; ++k) {
            const int d = ((from - k) % 8 + 8) % 8;
            const int rr = i3 + kDr[d];
            const int cc = j3 + kDc[d];
            if (F(rr, cc) != 0) {
              i4 = rr;
              j4 = cc;
              break;
            }
            if (d == 0) east_zero_examined = true;
          }
          if (east_zero_examined) {
            F(i3, j3) = -nbd;
          } else if (F(i3, j3) == 1) {
            F(i3, j3) = nbd;
          }
          if (i4 == i && j4 == j && i3 == i1 && j3 == j1) break;
          i2 = i3;
          j2 = j3;
          i3 = i4;
          j3 = j4;
        }
      }
      contours.push_back(std::move(contour));
      if (F(i, j) != 1) lnbd = std::abs(F(i, j));
    }
  }

  for (std::size_t n = 0; n < contours.size(); ++n) {
    const int p = info[n + 2].parent;
    if (p >= 2) contours[n].parent = static_cast<std::size_t>(p - 2);
  }
  return contours;
}

BinaryMask fill_component(const BinaryMask& m, Point seed) {
  BinaryMask comp(m.height, m.width);
  if (!m.in_bounds(seed.row, seed.col) || !m.at(seed.row, seed.col)) return comp;

  std::queue<Point> q;
  q.push(seed);
  comp.set(seed.row, seed.col, true);
  while (!q.empty()) {
    const Point p = q.front();
    q.pop();
    for (int d = 0; d < 8; ++d) {
      const int r = p.row + kDr[d];
      const int c = p.col + kDc[d];
      if (m.in_bounds(r, c) && m.at(r, c) && !comp.at(r, c)) {
        comp.set(r, c, true);
        q.push({r, c});
      }
    }
  }

  // Background reachable from outside the image (4-connected) is exterior;
  // everything else lies on or inside the component's outer border.
  BinaryMask outside(m.height, m.width);
  auto visit = [&](int r, int c) {
    if (m.in_bounds(r, c) && !comp.at(r, c) && !outside.at(r, c)) {
      outside.set(r, c, true);
      q.push({r, c});
    }
  };
  for (int r = 0; r < m.height; ++r) {
    visit(r, 0);
    visit(r, m.width - 1);
  }
  for (int c = 0; c < m.width; ++c) {
    visit(0, c);
    visit(m.height - 1, c);
  }
  while (!q.empty()) {
    const Point p = q.front();
    q.pop();
    visit(p.row + 1, p.col);
    visit(p.row - 1, p.col);
    visit(p.row, p.col + 1);
    visit(p.row, p.col - 1);
  }

  BinaryMask filled(m.height, m.width);
  for (std::size_t i = 0; i < filled.data.size(); ++i) filled.data[i] = outside.data[i] ? 0 : 1;
  return filled;
}

namespace {

RoIMask extract_roi(const Image& img, int bins, const Kernel& k, bool invert) {
  validate(img);
  const GrayImage gray = to_grayscale(img, bins);
  BinaryMask bin = binarize(gray, otsu_threshold(compute_histogram(gray)));
  if (invert) {
    for (auto& v : bin.data) v = v ? 0 : 1;
  }
  if (bin.count() == 0) throw Error(ErrorCode::NoContour, "binarization produced no foreground");
  const BinaryMask grown = dilate(bin, k);

  std::optional<BinaryMask> best;
  std::size_t best_area = 0;
  for (const auto& c : trace_borders(grown)) {
    if (c.kind != BorderKind::Outer) continue;
    BinaryMask filled = fill_component(grown, c.points.front());
    // Strict comparison keeps the first contour in raster order on ties.
    if (const std::size_t area = filled.count(); area > best_area) {
      best_area = area;
      best = std::move(filled);
    }
  }
  if (!best) throw Error(ErrorCode::NoContour, "no outer contour found");
  return RoIMask::from_mask(std::move(*best));
}

}  // namespace

RoIMask roi_mask(const Image& img, const RoiOptions& opts) {
  return extract_roi(img, opts.bins, Kernel::box(opts.kernel_size), opts.invert);
}

RoIMask roi_mask(const Image& img, const Kernel& k) { return extract_roi(img, 256, k, false); }

Image apply_mask(const Image& img, const RoIMask& m) {
  if (img.height != m.height() || img.width != m.width()) {
    throw Error(ErrorCode::DimensionMismatch, "mask and image dimensions differ");
  }
  Image out = img;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      if (!m.at(r, c))
        for (int ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = 0.0;
  return out;
}

}  // namespace imagekit
}  // namespace kryptolab
