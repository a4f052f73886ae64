#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "kryptolab/bench.hpp"
#include "kryptolab/defences.hpp"
#include "kryptolab/error.hpp"
#include "support.hpp"

using namespace kryptolab;
using namespace kryptolab::defences;
using gradnet::LayerSpec;

namespace {

Image naive_median(const Image& x) {
  Image out = x;
  for (int r = 0; r < x.height; ++r)
    for (int c = 0; c < x.width; ++c)
      for (int ch = 0; ch < x.channels; ++ch) {
        std::vector<double> v;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc)
            v.push_back(x.at(std::clamp(r + dr, 0, x.height - 1), std::clamp(c + dc, 0, x.width - 1), ch));
        std::sort(v.begin(), v.end());
        out.at(r, c, ch) = v[4];
      }
  return out;
}

DefenceConfig deflect_cfg(int n, bool denoise, std::uint64_t seed = 1) {
  DefenceConfig c;
  c.kind = DefenceKind::PixelDeflect;
  c.deflections = n;
  c.denoise = denoise;
  c.seed = seed;
  return c;
}

struct Toy {
  std::vector<Image> images;
  std::vector<int> labels;
};

Toy toy_data(int n, std::uint64_t seed) {
  const auto samples = bench::synth_samples(n, 32, seed);
  Toy t;
  for (const auto& s : samples) {
    t.images.push_back(s.image);
    t.labels.push_back(s.label);
  }
  return t;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (auto k : {DefenceKind::AdvTrain, DefenceKind::PixelDeflect, DefenceKind::Distill})
    EXPECT_EQ(parse_defence(to_string(k)), k);
  EXPECT_THROW(parse_defence("jumprelu"), Error);
}

TEST(Config, Validation) {
  DefenceConfig c;
  c.adversarial_fraction = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = DefenceConfig{};
  c.deflections = -1;
  EXPECT_THROW(c.validate(), Error);
  c = DefenceConfig{};
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = DefenceConfig{};
  c.window = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Median, MatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Image x = testkit::random_image(rng, 1 + t % 7, 1 + t % 5, t % 2 ? 3 : 1);
    EXPECT_EQ(median3x3(x), naive_median(x));
  }
}

TEST(PixelDeflect, IdentityConstantDeterminism) {
  std::mt19937_64 rng(2);
  const Image x = testkit::random_image(rng, 16, 16, 3);
  const Image sal = testkit::random_image(rng, 16, 16, 1);
  EXPECT_EQ(pixel_deflect(x, sal, deflect_cfg(0, false)), x);
  EXPECT_EQ(pixel_deflect(x, sal, deflect_cfg(0, true)), median3x3(x));
  const Image flat(16, 16, 3, 0.37);
  EXPECT_EQ(pixel_deflect(flat, sal, deflect_cfg(120, true)), flat);
  const auto a = pixel_deflect(x, sal, deflect_cfg(120, true, 5));
  EXPECT_EQ(a, pixel_deflect(x, sal, deflect_cfg(120, true, 5)));
  EXPECT_NE(pixel_deflect(x, sal, deflect_cfg(120, false, 5)), pixel_deflect(x, sal, deflect_cfg(120, false, 6)));
  EXPECT_TRUE(a.same_shape(x));
  for (double v : a.data) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(PixelDeflect, AvoidsSalientPixels) {
  // Saliency 1 everywhere except one pixel: only that pixel gets deflected.
  std::mt19937_64 rng(3);
  const Image x = testkit::random_image(rng, 12, 12, 1);
  Image sal(12, 12, 1, 1.0);
  sal.at(6, 4) = 0.0;
  const auto out = pixel_deflect(x, sal, deflect_cfg(40, false));
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 12; ++c)
      if (r != 6 || c != 4) EXPECT_EQ(out.at(r, c), x.at(r, c));
  // The replacement comes from the window around the target.
  bool found = false;
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 12; ++c) found |= x.at(r, c) == out.at(6, 4);
  EXPECT_TRUE(found);
}

TEST(Saliency, LogisticNetIsNormalizedAbsWeight) {
  const std::vector<double> w = {0.2, -0.8, 0.4, 0.1};
  const auto net = testkit::logistic_net(2, 2, 1, w, 0.0);
  const auto s = saliency_map(net, Image(2, 2, 1, 0.5));
  ASSERT_EQ(s.channels, 1);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s.data[i], std::abs(w[i]) / 0.8, 1e-12);
}

TEST(Distill, SoftLabelsAndHeadPromotion) {
  const auto specs = softmax_head_specs(bench::small_cnn_specs(), 20.0);
  ASSERT_EQ(specs.back().kind, gradnet::LayerKind::Softmax);
  EXPECT_EQ(specs.back().temperature, 20.0);
  EXPECT_EQ(specs[specs.size() - 2].width, 2);

  const auto data = toy_data(24, 4);
  gradnet::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.learning_rate = 0.1;
  DefenceConfig cfg;
  cfg.kind = DefenceKind::Distill;
  cfg.temperature = 20.0;
  const auto r = distill(bench::small_cnn_specs(), {1, 32, 32}, data.images, data.labels, tc, cfg);
  EXPECT_EQ(r.student.temperature(), 1.0);
  // Same architecture; only the softmax temperature differs.
  auto student_specs = r.student.specs();
  student_specs.back().temperature = r.teacher.specs().back().temperature;
  EXPECT_EQ(r.teacher.specs(), student_specs);
  ASSERT_EQ(r.soft_labels.size(), data.images.size());
  for (const auto& p : r.soft_labels) EXPECT_NEAR(p[0] + p[1], 1.0, 1e-9);

  auto teacher = r.teacher;
  const double before = teacher.temperature();
  const auto t1 = soft_labels(teacher, data.images, 1.0);
  const auto t5 = soft_labels(teacher, data.images, 5.0);
  const auto t20 = soft_labels(teacher, data.images, 20.0);
  EXPECT_EQ(teacher.temperature(), before);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    EXPECT_LE(entropy(t1[i]), entropy(t5[i]) + 1e-12);
    EXPECT_LE(entropy(t5[i]), entropy(t20[i]) + 1e-12);
  }
  EXPECT_THROW(soft_labels(teacher, data.images, 0.0), Error);
}

TEST(Distill, TemperatureOneRuns) {
  const auto data = toy_data(12, 5);
  gradnet::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  DefenceConfig cfg;
  cfg.kind = DefenceKind::Distill;
  cfg.temperature = 1.0;
  const auto r = distill(bench::small_cnn_specs(), {1, 32, 32}, data.images, data.labels, tc, cfg);
  const auto again = distill(bench::small_cnn_specs(), {1, 32, 32}, data.images, data.labels, tc, cfg);
  EXPECT_EQ(r.student.params(), again.student.params());
  for (const auto& p : r.soft_labels) EXPECT_NEAR(p[0] + p[1], 1.0, 1e-9);
}

TEST(AdvTrain, FractionZeroEqualsPlainTrain) {
  const auto data = toy_data(16, 6);
  const auto base = gradnet::Network::build(bench::small_cnn_specs(), {1, 32, 32}, 11);
  gradnet::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.learning_rate = 0.1;
  tc.seed = 3;
  DefenceConfig cfg;
  cfg.adversarial_fraction = 0.0;
  const auto hardened = adversarial_train(base, data.images, data.labels, tc, cfg);
  auto plain = gradnet::Network::build(bench::small_cnn_specs(), {1, 32, 32}, 11);
  gradnet::train(plain, data.images, data.labels, tc);
  EXPECT_EQ(hardened.params(), plain.params());
}

TEST(AdvTrain, WarmStartContinuesFromBase) {
  const auto data = toy_data(16, 8);
  auto base = gradnet::Network::build(bench::small_cnn_specs(), {1, 32, 32}, 13);
  gradnet::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.learning_rate = 0.1;
  gradnet::train(base, data.images, data.labels, tc);  // base now differs from its init
  DefenceConfig cfg;
  cfg.adversarial_fraction = 0.0;
  auto resumed = base;
  gradnet::train(resumed, data.images, data.labels, tc);
  EXPECT_EQ(adversarial_train(base, data.images, data.labels, tc, cfg).params(), resumed.params());
  cfg.warm_start = false;
  auto fresh = gradnet::Network::build(bench::small_cnn_specs(), {1, 32, 32}, 13);
  gradnet::train(fresh, data.images, data.labels, tc);
  EXPECT_EQ(adversarial_train(base, data.images, data.labels, tc, cfg).params(), fresh.params());
}

TEST(AdvTrain, DeterministicAndSchedulesDiffer) {
  const auto data = toy_data(16, 7);
  const auto base = gradnet::Network::build(bench::small_cnn_specs(), {1, 32, 32}, 12);
  gradnet::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.learning_rate = 0.1;
  DefenceConfig cfg;
  cfg.attack_config.epsilon = 0.05;
  const auto a = adversarial_train(base, data.images, data.labels, tc, cfg);
  EXPECT_EQ(a.params(), adversarial_train(base, data.images, data.labels, tc, cfg).params());
  cfg.schedule = RegenSchedule::Once;
  EXPECT_NE(a.params(), adversarial_train(base, data.images, data.labels, tc, cfg).params());
}
