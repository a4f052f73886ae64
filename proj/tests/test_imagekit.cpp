#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <set>

#include "kryptolab/error.hpp"
#include "kryptolab/imagekit.hpp"
#include "support.hpp"

using namespace kryptolab;
using namespace kryptolab::imagekit;

namespace {

BinaryMask naive_dilate(const BinaryMask& m, int k) {
  BinaryMask out(m.height, m.width);
  const int a = k / 2;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c) {
      bool v = false;
      for (int dr = -a; dr <= a; ++dr)
        for (int dc = -a; dc <= a; ++dc)
          if (m.in_bounds(r + dr, c + dc) && m.at(r + dr, c + dc)) v = true;
      out.set(r, c, v);
    }
  return out;
}

BinaryMask mask_from(std::initializer_list<const char*> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(std::strlen(*rows.begin()));
  BinaryMask m(h, w);
  int r = 0;
  for (const char* row : rows) {
    for (int c = 0; c < w; ++c) m.set(r, c, row[c] == '#');
    ++r;
  }
  return m;
}

std::set<Point> points_of(const Contour& c) { return {c.points.begin(), c.points.end()}; }

Image disk_image(int size, double cy, double cx, double radius, BinaryMask* truth) {
  Image img(size, size, 1, 0.1);
  if (truth) *truth = BinaryMask(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      if ((r - cy) * (r - cy) + (c - cx) * (c - cx) <= radius * radius) {
        img.at(r, c) = 0.8;
        if (truth) truth->set(r, c, true);
      }
  return img;
}

}  // namespace

TEST(Grayscale, ZeroAndOne) {
  const auto z = to_grayscale(Image(4, 4, 3, 0.0), 256);
  for (int v : z.data) EXPECT_EQ(v, 0);
  const auto o = to_grayscale(Image(4, 4, 1, 1.0), 256);
  for (int v : o.data) EXPECT_EQ(v, 255);
}

TEST(Grayscale, MatchesMeanThenQuantize) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Image img = testkit::random_image(rng, 8, 8, 3);
    for (int bins : {2, 16, 256}) {
      const auto g = to_grayscale(img, bins);
      ASSERT_EQ(g.height, 8);
      ASSERT_EQ(g.width, 8);
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
          const double m = (img.at(r, c, 0) + img.at(r, c, 1) + img.at(r, c, 2)) / 3.0;
          EXPECT_EQ(g.at(r, c), static_cast<int>(std::floor(m * (bins - 1) + 0.5)));
        }
    }
  }
}

TEST(Grayscale, RejectsTooFewBins) {
  EXPECT_THROW(to_grayscale(Image(2, 2, 1), 1), Error);
}

TEST(Histogram, TwoValueCase) {
  const GrayImage g{2, 2, 256, {0, 0, 255, 255}};
  const auto h = compute_histogram(g);
  EXPECT_DOUBLE_EQ(h.p[0], 0.5);
  EXPECT_DOUBLE_EQ(h.p[255], 0.5);
  EXPECT_EQ(h.nonempty_bins(), 2);
}

TEST(Histogram, ConstantImageSingleBin) {
  const GrayImage g{3, 3, 256, std::vector<int>(9, 77)};
  const auto h = compute_histogram(g);
  EXPECT_DOUBLE_EQ(h.p[77], 1.0);
  EXPECT_EQ(h.nonempty_bins(), 1);
}

TEST(Histogram, MatchesCountingOracleAndClosure) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = testkit::random_gray(rng, 16, 16, 256, trial % 3 == 0 ? 8 : 0);
    const auto h = compute_histogram(g);
    std::map<int, int> oracle;
    for (int v : g.data) ++oracle[v];
    double sum = 0.0;
    for (int i = 0; i < 256; ++i) {
      const double expect = oracle.count(i) ? oracle[i] / 256.0 : 0.0;
      EXPECT_DOUBLE_EQ(h.p[i], expect);
      sum += h.p[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (int t = 0; t <= 256; ++t) {
      EXPECT_NEAR(h.omega0[t] + h.omega1[t], 1.0, 1e-9);
      EXPECT_NEAR(h.omega0[t] * h.mu0[t] + h.omega1[t] * h.mu1[t], h.mu_total, 1e-9);
    }
  }
}

TEST(Otsu, BimodalSplitsBetweenModes) {
  GrayImage g{10, 10, 256, std::vector<int>(100, 50)};
  for (int i = 50; i < 100; ++i) g.data[i] = 200;
  const int t = otsu_threshold(compute_histogram(g));
  EXPECT_GT(t, 50);
  EXPECT_LE(t, 200);
  EXPECT_EQ(t, testkit::otsu_exact(g));
}

TEST(Otsu, ConstantImageIsDegenerate) {
  const GrayImage g{4, 4, 256, std::vector<int>(16, 3)};
  try {
    otsu_threshold(compute_histogram(g));
    FAIL() << "expected DegenerateImage";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateImage);
  }
}

TEST(Otsu, PropertyMatchesExhaustiveSearch) {
  std::mt19937_64 rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int levels = trial % 2 ? 256 : 16;
    const int side = 4 + trial % 13;
    const auto g = testkit::random_gray(rng, side, side, levels, trial % 4 == 0 ? 3 : 0);
    const auto h = compute_histogram(g);
    if (h.nonempty_bins() < 2) continue;
    const int t = otsu_threshold(h);
    ASSERT_EQ(t, testkit::otsu_exact(g)) << "trial " << trial;
    double best = 0.0;
    for (int s = 0; s <= levels; ++s) best = std::max(best, h.between_class_variance(s));
    EXPECT_NEAR(h.between_class_variance(t), best, 1e-9 * std::max(1.0, best));
    // sigma_b^2 = sigma^2 - sigma_w^2, so t also minimizes the within-class variance.
    for (int s = 1; s < levels; ++s) {
      EXPECT_NEAR(h.between_class_variance(s) + h.within_class_variance(s), h.total_variance(),
                  1e-7 * std::max(1.0, h.total_variance()));
      EXPECT_LE(h.within_class_variance(t), h.within_class_variance(s) + 1e-7 * std::max(1.0, h.total_variance()));
    }
    ++checked;
  }
  EXPECT_GT(checked, 300);
}

TEST(Binarize, Examples) {
  const GrayImage g{2, 2, 256, {0, 0, 255, 255}};
  const auto m = binarize(g, 100);
  EXPECT_EQ(m.data, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(binarize(g, 0).count(), 4u);
}

TEST(Binarize, MatchesPerPixelComparison) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = testkit::random_gray(rng, 12, 9, 256);
    const int t = otsu_threshold(compute_histogram(g));
    const auto m = binarize(g, t);
    for (std::size_t i = 0; i < g.data.size(); ++i) EXPECT_EQ(m.data[i] != 0, g.data[i] >= t);
  }
}

TEST(Dilate, ZeroAndImpulse) {
  EXPECT_EQ(dilate(BinaryMask(8, 8), Kernel::box(3)).count(), 0u);
  BinaryMask m(10, 10);
  m.set(5, 5, true);
  const auto d = dilate(m, Kernel::box(3));
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) EXPECT_EQ(d.at(r, c), std::abs(r - 5) <= 1 && std::abs(c - 5) <= 1);
}

TEST(Dilate, PropertyNaiveOracleMonotoneUnion) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + 2 * (trial % 3);
    const double dens = 0.05 + 0.4 * (trial % 5) / 4.0;
    const auto a = testkit::random_mask(rng, 16, 16, dens);
    const auto b = testkit::random_mask(rng, 16, 16, dens);
    const auto da = dilate(a, Kernel::box(k));
    ASSERT_EQ(da, naive_dilate(a, k));
    for (std::size_t i = 0; i < a.data.size(); ++i)
      if (a.data[i]) EXPECT_TRUE(da.data[i]);
    EXPECT_GE(da.count(), a.count());
    BinaryMask u(16, 16);
    for (std::size_t i = 0; i < u.data.size(); ++i) u.data[i] = a.data[i] | b.data[i];
    const auto db = dilate(b, Kernel::box(k));
    BinaryMask du(16, 16);
    for (std::size_t i = 0; i < du.data.size(); ++i) du.data[i] = da.data[i] | db.data[i];
    EXPECT_EQ(dilate(u, Kernel::box(k)), du);
    if (k == 1) EXPECT_EQ(dilate(da, Kernel::box(k)), da);
  }
}

TEST(Dilate, RejectsEvenKernel) {
  EXPECT_THROW(Kernel::box(4), Error);
  EXPECT_THROW(Kernel::box(0), Error);
}

TEST(TraceBorders, EmptyMask) { EXPECT_TRUE(trace_borders(BinaryMask(6, 6)).empty()); }

TEST(TraceBorders, SolidSquare) {
  BinaryMask m(10, 10);
  for (int r = 3; r < 7; ++r)
    for (int c = 2; c < 6; ++c) m.set(r, c, true);
  const auto cs = trace_borders(m);
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].kind, BorderKind::Outer);
  std::set<Point> expect;
  for (int r = 3; r < 7; ++r)
    for (int c = 2; c < 6; ++c)
      if (testkit::is_boundary(m, r, c)) expect.insert({r, c});
  EXPECT_EQ(expect.size(), 12u);
  EXPECT_EQ(points_of(cs[0]), expect);
}

TEST(TraceBorders, RingHasHoleWithParent) {
  const auto m = mask_from({
      "........",
      ".######.",
      ".#....#.",
      ".#....#.",
      ".######.",
      "........",
  });
  const auto cs = trace_borders(m);
  ASSERT_EQ(cs.size(), 2u);
  std::size_t outer = cs[0].kind == BorderKind::Outer ? 0 : 1;
  const std::size_t hole = 1 - outer;
  EXPECT_EQ(cs[outer].kind, BorderKind::Outer);
  EXPECT_EQ(cs[hole].kind, BorderKind::Hole);
  ASSERT_TRUE(cs[hole].parent.has_value());
  EXPECT_EQ(*cs[hole].parent, outer);
  EXPECT_NE(cs[outer].label, cs[hole].label);
}

TEST(TraceBorders, SinglePixelAndDiagonalChain) {
  const auto m = mask_from({
      ".....",
      ".#...",
      "..#..",
      "...#.",
      ".....",
  });
  const auto cs = trace_borders(m);
  ASSERT_EQ(cs.size(), 1u);  // diagonal neighbours are one 8-connected component
  EXPECT_EQ(points_of(cs[0]).size(), 3u);
  BinaryMask one(3, 3);
  one.set(1, 1, true);
  const auto c1 = trace_borders(one);
  ASSERT_EQ(c1.size(), 1u);
  EXPECT_EQ(points_of(c1[0]), (std::set<Point>{{1, 1}}));
}

// For every component: one outer contour; outer plus child hole contours
// cover exactly the component's boundary pixels; hole count matches the
// enclosed-background flood; consecutive points are 8-adjacent.
TEST(TraceBorders, PropertyFloodFillOracle) {
  std::mt19937_64 rng(314);
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 3 + trial % 10, w = 3 + (trial / 10) % 10;
    const auto m = testkit::random_mask(rng, h, w, 0.3 + 0.4 * ((trial % 7) / 6.0));
    int ncomp = 0;
    const auto lab = testkit::label_components(m, ncomp);
    const auto cs = trace_borders(m);

    std::set<int> labels;
    std::map<int, std::set<Point>> covered;  // component -> traced points
    int outers = 0, holes = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const auto& c = cs[i];
      ASSERT_FALSE(c.points.empty());
      labels.insert(c.label);
      for (std::size_t j = 1; j < c.points.size(); ++j) {
        EXPECT_LE(std::abs(c.points[j].row - c.points[j - 1].row), 1);
        EXPECT_LE(std::abs(c.points[j].col - c.points[j - 1].col), 1);
      }
      const auto& p0 = c.points.front();
      const int comp = lab[static_cast<std::size_t>(p0.row) * w + p0.col];
      ASSERT_GT(comp, 0);
      for (const auto& p : c.points) {
        ASSERT_TRUE(m.at(p.row, p.col));
        EXPECT_EQ(lab[static_cast<std::size_t>(p.row) * w + p.col], comp);
        covered[comp].insert(p);
      }
      if (c.kind == BorderKind::Outer) {
        ++outers;
      } else {
        ++holes;
        ASSERT_TRUE(c.parent.has_value());
        EXPECT_EQ(cs[*c.parent].kind, BorderKind::Outer);
        const auto& q = cs[*c.parent].points.front();
        EXPECT_EQ(lab[static_cast<std::size_t>(q.row) * w + q.col], comp);
      }
    }
    ASSERT_EQ(outers, ncomp) << "trial " << trial;
    EXPECT_EQ(holes, testkit::count_enclosed_holes(m)) << "trial " << trial;
    EXPECT_EQ(labels.size(), cs.size());

    std::map<int, std::set<Point>> oracle;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (testkit::is_boundary(m, r, c)) oracle[lab[static_cast<std::size_t>(r) * w + c]].insert({r, c});
    EXPECT_EQ(covered, oracle) << "trial " << trial;
  }
}

TEST(RoiMask, DiskCoversDilatedDisk) {
  BinaryMask truth;
  const Image img = disk_image(64, 31.5, 31.5, 12.0, &truth);
  std::size_t perimeter = 0;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) perimeter += testkit::is_boundary(truth, r, c);

  // Without dilation the mask is the disk itself.
  const auto raw = roi_mask(img, Kernel::box(1));
  EXPECT_EQ(raw.mask, truth);
  EXPECT_LE(std::llabs(static_cast<long long>(raw.area) - static_cast<long long>(truth.count())),
            static_cast<long long>(perimeter));

  for (int k : {3, 5}) {
    const auto roi = roi_mask(img, Kernel::box(k));
    const auto grown = naive_dilate(truth, k);
    EXPECT_EQ(roi.mask, grown);
    EXPECT_EQ(roi.area, grown.count());
    for (std::size_t i = 0; i < truth.data.size(); ++i)
      if (truth.data[i]) EXPECT_TRUE(roi.mask.data[i]);
  }
}

TEST(RoiMask, ConstantImageIsDegenerate) {
  try {
    roi_mask(Image(16, 16, 1, 0.4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateImage);
  }
}

TEST(RoiMask, TwoBlobsPicksLargerFilled) {
  Image img(48, 48, 1, 0.1);
  BinaryMask big(48, 48);
  // 16x16 ring-shaped big blob (hole inside must be filled) and an 8x8 small blob.
  for (int r = 4; r < 20; ++r)
    for (int c = 4; c < 20; ++c) {
      big.set(r, c, true);
      const bool hole = r >= 9 && r < 15 && c >= 9 && c < 15;
      if (!hole) img.at(r, c) = 0.9;
    }
  for (int r = 32; r < 40; ++r)
    for (int c = 30; c < 38; ++c) img.at(r, c) = 0.9;
  const auto roi = roi_mask(img, Kernel::box(1));
  EXPECT_EQ(roi.mask, big);
  EXPECT_EQ(roi.area, 256u);
}

TEST(RoiMask, InvertSelectsDarkRegion) {
  Image img(32, 32, 1, 0.9);
  for (int r = 10; r < 20; ++r)
    for (int c = 10; c < 20; ++c) img.at(r, c) = 0.1;
  const auto roi = roi_mask(img, RoiOptions{256, 1, true});
  EXPECT_EQ(roi.area, 100u);
  EXPECT_TRUE(roi.at(15, 15));
  EXPECT_FALSE(roi.at(0, 0));
}

TEST(RoiMask, Deterministic) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const Image img = testkit::random_image(rng, 32, 32, 3);
    const auto a = roi_mask(img);
    const auto b = roi_mask(img);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_GE(a.area, 1u);
    EXPECT_EQ(a.area, a.mask.count());
  }
}

TEST(ApplyMask, FullEmptyAndHalf) {
  std::mt19937_64 rng(8);
  const Image img = testkit::random_image(rng, 6, 5, 3);
  EXPECT_EQ(apply_mask(img, RoIMask::full(6, 5)), img);
  const auto zero = apply_mask(img, RoIMask::from_mask(BinaryMask(6, 5)));
  for (double v : zero.data) EXPECT_EQ(v, 0.0);
  BinaryMask half(6, 5);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) half.set(r, c, true);
  const auto out = apply_mask(img, RoIMask::from_mask(half));
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 5; ++c)
      for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(out.at(r, c, ch), r < 3 ? img.at(r, c, ch) : 0.0);
}

TEST(ApplyMask, DimensionMismatch) {
  try {
    apply_mask(Image(4, 4, 1), RoIMask::full(4, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}
