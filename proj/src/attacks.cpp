#include "kryptolab/attacks.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <random>

#include "kryptolab/error.hpp"
#include "kryptolab/imagekit.hpp"
#include "kryptolab/metrics.hpp"

namespace kryptolab::attacks {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::array<std::pair<AttackKind, std::string_view>, 7> kNames{{
    {AttackKind::Fgsm, "fgsm"},
    {AttackKind::Ifgsm, "ifgsm"},
    {AttackKind::Pgd, "pgd"},
    {AttackKind::Mifgsm, "mifgsm"},
    {AttackKind::DeepFool, "deepfool"},
    {AttackKind::Kryptonite, "kryptonite"},
    {AttackKind::KryptoniteMasked, "kryptonite_masked"},
}};

// Pushes DeepFool's linearized step strictly past the boundary.
constexpr double kDeepFoolPush = 1e-6;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
double into_ball(double v, double center, double eps) {
  return clamp01(std::min(std::max(v, center - eps), center + eps));
}

void check_pair(const Network& net, const Image& x) {
  validate(x);
  const auto s = net.input_shape();
  if (x.channels != s.channels || x.height != s.height || x.width != s.width) {
    throw Error(ErrorCode::ShapeMismatch, "image shape does not match the network input");
  }
}

// One signed step followed by Clip_{x,eps}. Pixels outside `allowed` keep
// their current value.
Image sign_step(const Image& cur, const Image& x, const std::vector<double>& dir, double alpha, double eps,
                const BinaryMask* allowed = nullptr) {
  Image out = cur;
  const std::size_t c = static_cast<std::size_t>(x.channels);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (allowed && allowed->data[i / c] == 0) continue;
    out.data[i] = into_ball(cur.data[i] + alpha * sign(dir[i]), x.data[i], eps);
  }
  return out;
}

double l1(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += std::abs(e);
  return s;
}

AttackResult finish(const Network& net, const Image& x, int y, Image adv, int iterations, Clock::time_point start) {
  AttackResult r;
  r.success = net.predict(adv) != y;
  r.elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  r.linf = metrics::lp_norm(x, adv, metrics::kInfinity);
  const double base = metrics::lp_norm(x, Image(x.height, x.width, x.channels, 0.0), 2.0);
  r.l2_percent = base > 0.0 ? metrics::perturbation_percent(x, adv) : (r.linf == 0.0 ? 0.0 : std::nan(""));
  r.iterations_used = iterations;
  r.adversarial = std::move(adv);
  return r;
}

struct MomentumOptions {
  bool adaptive = false;           // Kryptonite decay schedule
  const RoIMask* roi = nullptr;
  const BinaryMask* restrict_to = nullptr;
};

AttackResult momentum_attack(const Network& net, const Image& x, int y, const AttackConfig& cfg,
                             const MomentumOptions& opt, const IterateObserver& observe) {
  const auto start = Clock::now();
  cfg.validate();
  check_pair(net, x);
  const double alpha = cfg.step();

  MomentumState st;
  st.g = Tensor({static_cast<std::size_t>(x.height), static_cast<std::size_t>(x.width),
                 static_cast<std::size_t>(x.channels)});
  st.mu = cfg.initial_decay;

  auto masked = [&](const Image& img) -> Image {
    if (!opt.roi) return img;
    if (cfg.reextract_roi) {
      try {
        return imagekit::apply_mask(img, imagekit::roi_mask(img, imagekit::Kernel::box(cfg.kernel_size)));
      } catch (const Error&) {
        // Perturbed iterates may lose their contour; fall back to the clean RoI.
      }
    }
    return imagekit::apply_mask(img, *opt.roi);
  };

  Image cur = x;
  Image rho_cur = opt.adaptive ? masked(cur) : Image{};
  for (int t = 0; t < cfg.iterations; ++t) {
    const Tensor grad = net.input_gradient(cur, y);
    const double norm = l1(grad.data);
    if (norm == 0.0) throw Error(ErrorCode::ZeroGradient, "loss gradient vanished at iteration " + std::to_string(t));
    for (std::size_t i = 0; i < st.g.data.size(); ++i) st.g.data[i] = st.mu * st.g.data[i] + grad.data[i] / norm;
    Image next = sign_step(cur, x, st.g.data, alpha, cfg.epsilon, opt.restrict_to);
    if (opt.adaptive) {
      Image rho_next = masked(next);
      st.progress = roi_progress(rho_cur, rho_next);
      st.mu = cfg.decay_weight / std::max(st.progress, kProgressFloor);
      rho_cur = std::move(rho_next);
    }
    cur = std::move(next);
    if (observe) observe(t + 1, cur, &st);
  }
  return finish(net, x, y, std::move(cur), cfg.iterations, start);
}

void check_roi(const Image& x, const RoIMask& roi) {
  if (roi.height() != x.height || roi.width() != x.width) {
    throw Error(ErrorCode::DimensionMismatch, "RoI mask does not match the image");
  }
  if (roi.area == 0) throw Error(ErrorCode::EmptyRoI, "RoI mask is empty");
}

}  // namespace

std::string to_string(AttackKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return std::string(name);
  }
  return "unknown";
}

AttackKind parse_attack(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown attack '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) bad("epsilon must lie in [0, 1]");
  if (iterations < 1) bad("iterations must be at least 1");
  if (alpha && !(*alpha > 0.0)) bad("alpha must be positive");
  if (!(decay_weight >= 0.0)) bad("decay weight must be non-negative");
  if (!(initial_decay >= 0.0)) bad("initial decay must be non-negative");
  if (!(overshoot >= 0.0)) bad("overshoot must be non-negative");
  if (kernel_size < 1 || kernel_size % 2 == 0) bad("kernel size must be odd and positive");
}

Image clip_to_ball(const Image& candidate, const Image& x, double eps) {
  if (!candidate.same_shape(x)) throw Error(ErrorCode::DimensionMismatch, "clip: shapes differ");
  Image out = candidate;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = into_ball(candidate.data[i], x.data[i], eps);
  }
  return out;
}

AttackResult fgsm(const Network& net, const Image& x, int y, const AttackConfig& cfg) {
  const auto start = Clock::now();
  cfg.validate();
  check_pair(net, x);
  const Tensor grad = net.input_gradient(x, y);
  return finish(net, x, y, sign_step(x, x, grad.data, cfg.epsilon, cfg.epsilon), 1, start);
}

AttackResult ifgsm(const Network& net, const Image& x, int y, const AttackConfig& cfg, const IterateObserver& observe) {
  const auto start = Clock::now();
  cfg.validate();
  check_pair(net, x);
  const double alpha = cfg.step();
  Image cur = x;
  for (int t = 0; t < cfg.iterations; ++t) {
    cur = sign_step(cur, x, net.input_gradient(cur, y).data, alpha, cfg.epsilon);
    if (observe) observe(t + 1, cur, nullptr);
  }
  return finish(net, x, y, std::move(cur), cfg.iterations, start);
}

AttackResult pgd(const Network& net, const Image& x, int y, const AttackConfig& cfg, const IterateObserver& observe) {
  const auto start = Clock::now();
  cfg.validate();
  check_pair(net, x);
  const double alpha = cfg.step();
  std::mt19937_64 rng(cfg.seed);
  Image cur = x;
  for (std::size_t i = 0; i < cur.data.size(); ++i) {
    const double u = std::generate_canonical<double, 53>(rng);
    cur.data[i] = clamp01(x.data[i] + cfg.epsilon * (2.0 * u - 1.0));
  }
  cur = clip_to_ball(cur, x, cfg.epsilon);
  for (int t = 0; t < cfg.iterations; ++t) {
    cur = sign_step(cur, x, net.input_gradient(cur, y).data, alpha, cfg.epsilon);
    if (observe) observe(t + 1, cur, nullptr);
  }
  return finish(net, x, y, std::move(cur), cfg.iterations, start);
}

AttackResult mifgsm(const Network& net, const Image& x, int y, const AttackConfig& cfg, const IterateObserver& observe) {
  return momentum_attack(net, x, y, cfg, {}, observe);
}

double roi_progress(const Image& rho_prev, const Image& rho_next) {
  return metrics::lp_norm(rho_prev, rho_next, 2.0);
}

AttackResult kryptonite(const Network& net, const Image& x, int y, const RoIMask& roi, const AttackConfig& cfg,
                        const IterateObserver& observe) {
  check_roi(x, roi);
  return momentum_attack(net, x, y, cfg, {true, &roi, nullptr}, observe);
}

AttackResult kryptonite_masked(const Network& net, const Image& x, int y, const RoIMask& roi, const AttackConfig& cfg,
                               const IterateObserver& observe) {
  check_roi(x, roi);
  return momentum_attack(net, x, y, cfg, {true, &roi, &roi.mask}, observe);
}

AttackResult deepfool_linf(const Network& net, const Image& x, const AttackConfig& cfg, const IterateObserver& observe) {
  const auto start = Clock::now();
  cfg.validate();
  check_pair(net, x);
  const bool sigmoid = net.head() == gradnet::Head::Sigmoid;
  if (!sigmoid && net.num_outputs() != 2) {
    throw Error(ErrorCode::InvalidArgument, "DeepFool supports binary heads only");
  }
  const std::vector<double> seed = sigmoid ? std::vector<double>{1.0} : std::vector<double>{-1.0, 1.0};
  auto margin = [&](const Image& img) {
    const auto z = net.logits(img);
    return sigmoid ? z[0] : z[1] - z[0];
  };

  const int original = net.predict(x);
  const double dir = original == 1 ? -1.0 : 1.0;
  std::vector<double> r_total(x.data.size(), 0.0);
  Image cur = x;
  Image candidate = x;
  int used = 0;
  for (int t = 0; t < cfg.iterations; ++t) {
    const double f = margin(cur);
    const Tensor grad = net.logit_gradient(cur, seed);
    const double norm = l1(grad.data);
    if (norm == 0.0) throw Error(ErrorCode::ZeroGradient, "logit margin gradient vanished");
    const double step = (std::abs(f) + kDeepFoolPush) / norm;
    for (std::size_t i = 0; i < r_total.size(); ++i) {
      r_total[i] += step * dir * sign(grad.data[i]);
      cur.data[i] = into_ball(x.data[i] + r_total[i], x.data[i], cfg.epsilon);
      candidate.data[i] = into_ball(x.data[i] + (1.0 + cfg.overshoot) * r_total[i], x.data[i], cfg.epsilon);
    }
    used = t + 1;
    if (observe) observe(used, candidate, nullptr);
    if (net.predict(candidate) != original) break;
  }
  return finish(net, x, original, std::move(candidate), used, start);
}

AttackResult run_attack(AttackKind kind, const Network& net, const Image& x, int y, const AttackConfig& cfg) {
  switch (kind) {
    case AttackKind::Fgsm: return fgsm(net, x, y, cfg);
    case AttackKind::Ifgsm: return ifgsm(net, x, y, cfg);
    case AttackKind::Pgd: return pgd(net, x, y, cfg);
    case AttackKind::Mifgsm: return mifgsm(net, x, y, cfg);
    case AttackKind::DeepFool: return deepfool_linf(net, x, cfg);
    case AttackKind::Kryptonite:
    case AttackKind::KryptoniteMasked: {
      const auto start = Clock::now();
      RoIMask roi;
      try {
        roi = imagekit::roi_mask(x, imagekit::Kernel::box(cfg.kernel_size));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateImage && e.code() != ErrorCode::NoContour) throw;
        roi = RoIMask::full(x.height, x.width);
      }
      auto r = kind == AttackKind::Kryptonite ? kryptonite(net, x, y, roi, cfg) : kryptonite_masked(net, x, y, roi, cfg);
      r.elapsed = std::chrono::duration<double>(Clock::now() - start).count();
      return r;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled attack kind");
}

}  // namespace kryptolab::attacks
