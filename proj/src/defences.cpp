#include "kryptolab/defences.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "kryptolab/error.hpp"

namespace kryptolab::defences {

namespace {

constexpr std::array<std::pair<DefenceKind, std::string_view>, 3> kNames{{
    {DefenceKind::AdvTrain, "adv_train"},
    {DefenceKind::PixelDeflect, "pixel_deflect"},
    {DefenceKind::Distill, "distill"},
}};

// Keeps every pixel eligible for deflection, even the most salient one.
constexpr double kSaliencyFloor = 1e-6;

}  // namespace

std::string to_string(DefenceKind kind) {
  for (const auto& [k, n] : kNames) {
    if (k == kind) return std::string(n);
  }
  return "unknown";
}

DefenceKind parse_defence(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown defence '" + std::string(name) + "'");
}

void DefenceConfig::validate() const {
  if (!(adversarial_fraction >= 0.0 && adversarial_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "adversarial fraction must lie in [0, 1]");
  }
  if (deflections < 0) throw Error(ErrorCode::InvalidArgument, "deflections must be non-negative");
  if (window < 1) throw Error(ErrorCode::InvalidArgument, "deflection window must be at least 1");
  if (!(temperature > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be positive");
  attack_config.validate();
}

Network adversarial_train(const Network& base, const std::vector<Image>& images, const std::vector<int>& labels,
                          const gradnet::TrainConfig& train_cfg, const DefenceConfig& cfg) {
  cfg.validate();
  if (images.size() != labels.size()) throw Error(ErrorCode::DimensionMismatch, "images and labels differ in length");
  Network net = cfg.warm_start ? base : Network::build(base.specs(), base.input_shape(), base.seed());

  const auto n_adv = static_cast<std::size_t>(std::llround(cfg.adversarial_fraction * static_cast<double>(images.size())));
  if (n_adv == 0) {
    gradnet::train(net, images, labels, train_cfg);
    return net;
  }

  std::vector<std::size_t> chosen(images.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(chosen.begin(), chosen.end(), rng);
  chosen.resize(n_adv);
  std::sort(chosen.begin(), chosen.end());

  auto hook = [&](int epoch, const Network& current, std::vector<Image>& batch) {
    if (epoch > 0 && cfg.schedule == RegenSchedule::Once) return;
    const Network& source = epoch == 0 ? base : current;
    for (std::size_t i : chosen) {
      try {
        batch[i] = attacks::run_attack(cfg.attack, source, images[i], labels[i], cfg.attack_config).adversarial;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroGradient) throw;
        batch[i] = images[i];
      }
    }
  };
  gradnet::train(net, images, labels, train_cfg, hook);
  return net;
}

Image saliency_map(const Network& net, const Image& x) {
  const auto grad = net.input_gradient(x, net.predict(x));
  Image s(x.height, x.width, 1, 0.0);
  double peak = 0.0;
  for (int r = 0; r < x.height; ++r) {
    for (int c = 0; c < x.width; ++c) {
      double m = 0.0;
      for (int ch = 0; ch < x.channels; ++ch) m = std::max(m, std::abs(grad.data[x.index(r, c, ch)]));
      s.at(r, c) = m;
      peak = std::max(peak, m);
    }
  }
  if (peak > 0.0) {
    for (double& v : s.data) v /= peak;
  }
  return s;
}

Image median3x3(const Image& x) {
  Image out = x;
  std::array<double, 9> win{};
  for (int r = 0; r < x.height; ++r) {
    for (int c = 0; c < x.width; ++c) {
      for (int ch = 0; ch < x.channels; ++ch) {
        std::size_t k = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = std::clamp(r + dr, 0, x.height - 1);
            const int cc = std::clamp(c + dc, 0, x.width - 1);
            win[k++] = x.at(rr, cc, ch);
          }
        }
        std::nth_element(win.begin(), win.begin() + 4, win.end());
        out.at(r, c, ch) = win[4];
      }
    }
  }
  return out;
}

Image pixel_deflect(const Image& x, const Image& saliency, const DefenceConfig& cfg) {
  validate(x);
  if (saliency.height != x.height || saliency.width != x.width) {
    throw Error(ErrorCode::DimensionMismatch, "saliency map does not match the image");
  }
  if (cfg.deflections < 0) throw Error(ErrorCode::InvalidArgument, "deflections must be non-negative");
  if (cfg.window < 1) throw Error(ErrorCode::InvalidArgument, "deflection window must be at least 1");

  Image out = x;
  if (cfg.deflections > 0) {
    std::vector<double> weight(static_cast<std::size_t>(x.height) * x.width);
    for (std::size_t i = 0; i < weight.size(); ++i) {
      const double s = std::clamp(saliency.data[i * saliency.channels], 0.0, 1.0);
      weight[i] = 1.0 - s + kSaliencyFloor;
    }
    std::discrete_distribution<std::size_t> pick(weight.begin(), weight.end());
    std::mt19937_64 rng(cfg.seed);
    for (int d = 0; d < cfg.deflections; ++d) {
      const std::size_t target = pick(rng);
      const int r = static_cast<int>(target / x.width);
      const int c = static_cast<int>(target % x.width);
      std::uniform_int_distribution<int> rows(std::max(0, r - cfg.window), std::min(x.height - 1, r + cfg.window));
      std::uniform_int_distribution<int> cols(std::max(0, c - cfg.window), std::min(x.width - 1, c + cfg.window));
      const int sr = rows(rng);
      const int sc = cols(rng);
      for (int ch = 0; ch < x.channels; ++ch) out.at(r, c, ch) = out.at(sr, sc, ch);
    }
  }
  return cfg.denoise ? median3x3(out) : out;
}

std::vector<gradnet::LayerSpec> softmax_head_specs(std::vector<gradnet::LayerSpec> specs, double temperature) {
  using gradnet::LayerKind;
  if (!(temperature > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be positive");
  if (specs.empty()) throw Error(ErrorCode::ShapeMismatch, "empty layer list");
  auto& head = specs.back();
  if (head.kind == LayerKind::Sigmoid) {
    if (specs.size() < 2 || specs[specs.size() - 2].kind != LayerKind::Dense) {
      throw Error(ErrorCode::ShapeMismatch, "a sigmoid head must follow a dense layer to be promoted");
    }
    specs[specs.size() - 2].width = 2;
    head = gradnet::LayerSpec::softmax(temperature);
  } else if (head.kind == LayerKind::Softmax) {
    head.temperature = temperature;
  } else {
    throw Error(ErrorCode::ShapeMismatch, "network has no classification head");
  }
  return specs;
}

std::vector<gradnet::Target> soft_labels(Network& teacher, const std::vector<Image>& images, double temperature) {
  const double saved = teacher.temperature();
  teacher.set_temperature(temperature);
  std::vector<gradnet::Target> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(teacher.forward(img));
  teacher.set_temperature(saved);
  return out;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

DistillResult distill(const std::vector<gradnet::LayerSpec>& teacher_specs, gradnet::Shape3 input,
                      const std::vector<Image>& images, const std::vector<int>& labels,
                      const gradnet::TrainConfig& train_cfg, const DefenceConfig& cfg) {
  cfg.validate();
  const auto specs = softmax_head_specs(teacher_specs, cfg.temperature);
  Network teacher = Network::build(specs, input, cfg.seed);
  gradnet::train(teacher, images, labels, train_cfg);
  auto soft = soft_labels(teacher, images, cfg.temperature);

  Network student = Network::build(specs, input, cfg.seed + 1);
  gradnet::train(student, images, soft, train_cfg);
  student.set_temperature(1.0);
  return {std::move(teacher), std::move(student), std::move(soft)};
}

}  // namespace kryptolab::defences
