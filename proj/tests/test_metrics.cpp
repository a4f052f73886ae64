#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "kryptolab/error.hpp"
#include "kryptolab/metrics.hpp"
#include "support.hpp"

using namespace kryptolab;
using namespace kryptolab::metrics;

namespace {

double auc_pairs(const std::vector<ScoredSample>& s) {
  double num = 0.0;
  long long pairs = 0;
  for (const auto& a : s)
    for (const auto& b : s)
      if (a.label == 1 && b.label == 0) {
        ++pairs;
        num += a.score > b.score ? 1.0 : (a.score == b.score ? 0.5 : 0.0);
      }
  return num / static_cast<double>(pairs);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(LpNorm, Examples) {
  std::mt19937_64 rng(1);
  const Image a = testkit::random_image(rng, 4, 4, 3);
  for (double p : {1.0, 2.0, 3.0, kInfinity}) EXPECT_EQ(lp_norm(a, a, p), 0.0);
  Image b = a;
  b.data[5] = a.data[5] > 0.5 ? a.data[5] - 0.5 : a.data[5] + 0.5;
  for (double p : {1.0, 2.0, kInfinity}) EXPECT_NEAR(lp_norm(a, b, p), 0.5, 1e-15);
  EXPECT_EQ(code_of([&] { lp_norm(a, Image(4, 4, 1), 2.0); }), ErrorCode::DimensionMismatch);
}

TEST(LpNorm, PropertyOracleAndMetricAxioms) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const int h = 1 + t % 7, w = 1 + t % 5, c = t % 2 ? 3 : 1;
    const Image a = testkit::random_image(rng, h, w, c);
    const Image b = testkit::random_image(rng, h, w, c);
    const Image z = testkit::random_image(rng, h, w, c);
    double s1 = 0.0, s2 = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = std::abs(a.data[i] - b.data[i]);
      s1 += d;
      s2 += d * d;
      mx = std::max(mx, d);
    }
    EXPECT_NEAR(lp_norm(a, b, 1.0), s1, 1e-12);
    EXPECT_NEAR(lp_norm(a, b, 2.0), std::sqrt(s2), 1e-12);
    EXPECT_EQ(lp_norm(a, b, kInfinity), mx);
    for (double p : {1.0, 2.0, 4.0, kInfinity}) {
      EXPECT_EQ(lp_norm(a, b, p), lp_norm(b, a, p));
      EXPECT_LE(lp_norm(a, b, p), lp_norm(a, z, p) + lp_norm(z, b, p) + 1e-12);
      EXPECT_GT(lp_norm(a, b, p), 0.0);
    }
  }
}

TEST(Perturbation, Examples) {
  Image x(4, 4, 1, 0.5);
  x.data[3] = 0.2;
  EXPECT_EQ(perturbation_percent(x, x), 0.0);
  Image adv = x;
  for (double& v : adv.data) v *= 1.01;
  EXPECT_NEAR(perturbation_percent(x, adv), 1.0, 1e-10);
  EXPECT_EQ(code_of([&] { perturbation_percent(Image(2, 2, 1), Image(2, 2, 1, 0.1)); }), ErrorCode::ZeroImage);
}

TEST(Accuracy, ExamplesAndOracle) {
  EXPECT_EQ(accuracy({0.9, 0.1, 0.5}, {1, 0, 1}), 1.0);
  EXPECT_EQ(accuracy({0.1, 0.9}, {1, 0}), 0.0);
  EXPECT_EQ(code_of([] { accuracy({}, {}); }), ErrorCode::EmptySet);
  EXPECT_THROW(accuracy({0.1}, {1, 0}), Error);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(1 + t);
    std::vector<int> y(p.size());
    int right = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng);
      y[i] = u(rng) < 0.5;
      right += (p[i] >= 0.5) == (y[i] == 1);
    }
    EXPECT_DOUBLE_EQ(accuracy(p, y), static_cast<double>(right) / p.size());
  }
}

TEST(RocAuc, Examples) {
  EXPECT_EQ(roc_auc({{0.1, 0}, {0.2, 0}, {0.8, 1}, {0.9, 1}}), 1.0);
  EXPECT_EQ(roc_auc({{0.4, 0}, {0.4, 1}, {0.4, 0}, {0.4, 1}}), 0.5);
  EXPECT_EQ(code_of([] { roc_auc({{0.1, 1}, {0.3, 1}}); }), ErrorCode::SingleClass);
}

TEST(RocAuc, PropertyPairwiseOracleMonotoneAndFlip) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    std::vector<ScoredSample> s(20);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i].score = t % 2 ? coarse(rng) / 10.0 : u(rng);  // odd trials have ties
      s[i].label = static_cast<int>(i % 2);
    }
    const double auc = roc_auc(s);
    EXPECT_EQ(auc, auc_pairs(s));
    EXPECT_GE(auc, 0.0);
    EXPECT_LE(auc, 1.0);
    auto m = s;
    for (auto& v : m) v.score = std::exp(2.0 * v.score) + 5.0;
    EXPECT_EQ(roc_auc(m), auc);
    if (t % 2 == 0) {
      auto neg = s;
      for (auto& v : neg) v.score = -v.score;
      EXPECT_NEAR(roc_auc(neg) + auc, 1.0, 1e-12);
    }
  }
}

TEST(Pearson, KnownValues) {
  EXPECT_NEAR(pearson({1, 2, 3}, {2, 4, 6}), 1.0, 1e-12);
  EXPECT_NEAR(pearson({1, 2, 3}, {3, 2, 1}), -1.0, 1e-12);
}
