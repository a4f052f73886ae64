// Generators and independent oracles shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "kryptolab/image.hpp"
#include "kryptolab/network.hpp"

namespace testkit {

using kryptolab::BinaryMask;
using kryptolab::GrayImage;
using kryptolab::Image;

inline Image random_image(std::mt19937_64& rng, int h, int w, int c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w, c);
  for (double& v : img.data) v = u(rng);
  return img;
}

inline GrayImage random_gray(std::mt19937_64& rng, int h, int w, int levels, int spread = 0) {
  // spread > 0 restricts values to a random window so ties and gaps appear.
  std::uniform_int_distribution<int> lo_d(0, levels - 1);
  int lo = 0, hi = levels - 1;
  if (spread > 0) {
    lo = lo_d(rng) % std::max(1, levels - spread);
    hi = std::min(levels - 1, lo + spread);
  }
  std::uniform_int_distribution<int> v(lo, hi);
  GrayImage g{h, w, levels, std::vector<int>(static_cast<std::size_t>(h) * w)};
  for (int& x : g.data) x = v(rng);
  return g;
}

inline BinaryMask random_mask(std::mt19937_64& rng, int h, int w, double density) {
  std::bernoulli_distribution b(density);
  BinaryMask m(h, w);
  for (auto& v : m.data) v = b(rng) ? 1 : 0;
  return m;
}

/// Otsu by exhaustive search in exact integer arithmetic. For the split
/// [0,t) | [t,L) the between-class variance is (N*S0 - n0*S)^2 / (N^2 n0 n1);
/// candidates are compared by cross-multiplication. Smallest t wins ties.
inline int otsu_exact(const GrayImage& g) {
  const int L = g.levels;
  std::vector<std::int64_t> count(L, 0);
  for (int v : g.data) ++count[v];
  const std::int64_t N = static_cast<std::int64_t>(g.data.size());
  std::int64_t S = 0;
  for (int i = 0; i < L; ++i) S += i * count[i];
  __int128 best_num = -1;
  __int128 best_den = 1;
  int best_t = 1;
  std::int64_t n0 = 0, s0 = 0;
  for (int t = 1; t < L; ++t) {
    n0 += count[t - 1];
    s0 += static_cast<std::int64_t>(t - 1) * count[t - 1];
    const std::int64_t n1 = N - n0;
    __int128 num = 0, den = 1;
    if (n0 > 0 && n1 > 0) {
      const __int128 d = static_cast<__int128>(N) * s0 - static_cast<__int128>(n0) * S;
      num = d * d;
      den = static_cast<__int128>(n0) * n1;
    }
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return best_t;
}

/// 8-connected foreground components by BFS; returns a label grid (0 = bg).
inline std::vector<int> label_components(const BinaryMask& m, int& count) {
  std::vector<int> lab(m.data.size(), 0);
  count = 0;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (!m.at(r, c) || lab[static_cast<std::size_t>(r) * m.width + c]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({r, c});
      lab[static_cast<std::size_t>(r) * m.width + c] = count;
      while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (!m.in_bounds(ny, nx) || !m.at(ny, nx)) continue;
            auto& l = lab[static_cast<std::size_t>(ny) * m.width + nx];
            if (l) continue;
            l = count;
            q.push({ny, nx});
          }
        }
      }
    }
  }
  return lab;
}

/// Foreground pixels with a 4-neighbour that is background or off the image.
inline bool is_boundary(const BinaryMask& m, int r, int c) {
  if (!m.at(r, c)) return false;
  const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    const int y = r + dr[k], x = c + dc[k];
    if (!m.in_bounds(y, x) || !m.at(y, x)) return true;
  }
  return false;
}

/// 4-connected background pixels not reachable from the image frame.
inline int count_enclosed_holes(const BinaryMask& m) {
  const int H = m.height, W = m.width;
  std::vector<int> seen(m.data.size(), 0);
  auto flood = [&](int r, int c) {
    std::queue<std::pair<int, int>> q;
    q.push({r, c});
    seen[static_cast<std::size_t>(r) * W + c] = 1;
    while (!q.empty()) {
      auto [y, x] = q.front();
      q.pop();
      const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int ny = y + dr[k], nx = x + dc[k];
        if (!m.in_bounds(ny, nx) || m.at(ny, nx) || seen[static_cast<std::size_t>(ny) * W + nx]) continue;
        seen[static_cast<std::size_t>(ny) * W + nx] = 1;
        q.push({ny, nx});
      }
    }
  };
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if ((r == 0 || c == 0 || r == H - 1 || c == W - 1) && !m.at(r, c) && !seen[static_cast<std::size_t>(r) * W + c]) {
        flood(r, c);
      }
    }
  }
  int holes = 0;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      if (!m.at(r, c) && !seen[static_cast<std::size_t>(r) * W + c]) {
        ++holes;
        flood(r, c);
      }
    }
  }
  return holes;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double bce(double p, int y) {
  p = std::clamp(p, 1e-7, 1.0 - 1e-7);
  return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

/// Logistic-regression network (flatten, dense 1, sigmoid) with given weights.
inline kryptolab::gradnet::Network logistic_net(int h, int w, int c, const std::vector<double>& weights, double bias) {
  using namespace kryptolab::gradnet;
  auto net = Network::build({LayerSpec::flatten(), LayerSpec::dense(1), LayerSpec::sigmoid()}, {c, h, w}, 1);
  // Flatten is channel-major; the caller gives weights in that order.
  net.params()[1].weight.data = weights;
  net.params()[1].bias.data = {bias};
  return net;
}

/// Relative error with a floor so near-zero pairs compare absolutely.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testkit
