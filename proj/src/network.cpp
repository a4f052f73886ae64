#include "kryptolab/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "kryptolab/error.hpp"

namespace kryptolab::gradnet {

namespace {

constexpr double kProbClamp = 1e-7;

Error shape_error(std::size_t layer, LayerKind kind, const std::string& why) {
  return Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(layer) + " (" + to_string(kind) + "): " + why);
}

struct ConvGeometry {
  int out_h, out_w, pad_top, pad_left;
};

// Range [lo, hi) of output columns whose source column ox*stride + kx - pad
// lands inside [0, width).
std::pair<int, int> valid_columns(int kx, int pad, int stride, int in_width, int out_width) {
  const int lo = pad > kx ? (pad - kx + stride - 1) / stride : 0;
  const int top = in_width - 1 + pad - kx;
  const int hi = top < 0 ? 0 : std::min(out_width, top / stride + 1);
  return {lo, std::max(lo, hi)};
}

ConvGeometry conv_geometry(const LayerSpec& s, Shape3 in) {
  ConvGeometry g{};
  if (s.padding == Padding::Same) {
    g.out_h = (in.height + s.stride - 1) / s.stride;
    g.out_w = (in.width + s.stride - 1) / s.stride;
    g.pad_top = std::max((g.out_h - 1) * s.stride + s.kernel - in.height, 0) / 2;
    g.pad_left = std::max((g.out_w - 1) * s.stride + s.kernel - in.width, 0) / 2;
  } else {
    g.out_h = (in.height - s.kernel) / s.stride + 1;
    g.out_w = (in.width - s.kernel) / s.stride + 1;
  }
  return g;
}

// Per-layer dropout stream derived from the caller's seed.
std::uint64_t mix_seed(std::uint64_t seed, std::size_t layer) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (layer + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  data.assign(n, fill);
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride, Padding pad) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = pad;
  return s;
}
LayerSpec LayerSpec::relu() { return LayerSpec{}; }
LayerSpec LayerSpec::maxpool(int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool;
  s.window = window;
  s.stride = stride;
  return s;
}
LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::Dropout;
  s.rate = rate;
  return s;
}
LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  return s;
}
LayerSpec LayerSpec::dense(int width) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.width = width;
  return s;
}
LayerSpec LayerSpec::sigmoid() {
  LayerSpec s;
  s.kind = LayerKind::Sigmoid;
  return s;
}
LayerSpec LayerSpec::softmax(double temperature) {
  LayerSpec s;
  s.kind = LayerKind::Softmax;
  s.temperature = temperature;
  return s;
}

std::vector<Shape3> infer_shapes(const std::vector<LayerSpec>& specs, Shape3 input) {
  if (specs.empty()) throw Error(ErrorCode::ShapeMismatch, "network has no layers");
  if (input.size() == 0) throw Error(ErrorCode::ShapeMismatch, "input shape is empty");
  std::vector<Shape3> shapes{input};
  Shape3 cur = input;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    const bool last = i + 1 == specs.size();
    switch (s.kind) {
      case LayerKind::Conv: {
        if (s.kernel < 1 || s.kernel % 2 == 0) throw shape_error(i, s.kind, "kernel must be odd");
        if (s.out_channels < 1 || s.stride < 1) throw shape_error(i, s.kind, "channels and stride must be positive");
        const auto g = conv_geometry(s, cur);
        if (g.out_h < 1 || g.out_w < 1) throw shape_error(i, s.kind, "kernel larger than input");
        cur = {s.out_channels, g.out_h, g.out_w};
        break;
      }
      case LayerKind::MaxPool: {
        if (s.window < 1 || s.stride < 1) throw shape_error(i, s.kind, "window and stride must be positive");
        if (s.window > cur.height || s.window > cur.width) throw shape_error(i, s.kind, "window larger than input");
        cur = {cur.channels, (cur.height - s.window) / s.stride + 1, (cur.width - s.window) / s.stride + 1};
        break;
      }
      case LayerKind::Dropout:
        if (!(s.rate >= 0.0 && s.rate < 1.0)) throw shape_error(i, s.kind, "rate must lie in [0,1)");
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::Flatten:
        cur = {static_cast<int>(cur.size()), 1, 1};
        break;
      case LayerKind::Dense:
        if (s.width < 1) throw shape_error(i, s.kind, "width must be positive");
        cur = {s.width, 1, 1};
        break;
      case LayerKind::Sigmoid:
        if (!last) throw shape_error(i, s.kind, "output head must be the final layer");
        if (cur.size() != 1) throw shape_error(i, s.kind, "sigmoid head needs exactly one logit");
        break;
      case LayerKind::Softmax:
        if (!last) throw shape_error(i, s.kind, "output head must be the final layer");
        if (cur.size() < 2) throw shape_error(i, s.kind, "softmax head needs at least two logits");
        if (!(s.temperature > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "softmax temperature must be > 0");
        break;
    }
    if (last && s.kind != LayerKind::Sigmoid && s.kind != LayerKind::Softmax) {
      throw shape_error(i, s.kind, "final layer must be a sigmoid or softmax head");
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::size_t count_parameters(const std::vector<LayerSpec>& specs, Shape3 input) {
  const auto shapes = infer_shapes(specs, input);
  std::size_t n = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const Shape3 in = shapes[i];
    if (s.kind == LayerKind::Conv) {
      n += static_cast<std::size_t>(s.out_channels) * in.channels * s.kernel * s.kernel + s.out_channels;
    } else if (s.kind == LayerKind::Dense) {
      n += static_cast<std::size_t>(s.width) * in.size() + s.width;
    }
  }
  return n;
}

std::vector<LayerSpec> reference_cnn_specs() { return scaled_cnn_specs(1); }

std::vector<LayerSpec> scaled_cnn_specs(int divisor) {
  auto w = [divisor](int n) { return std::max(1, n / divisor); };
  return {
      LayerSpec::conv(w(50), 3),  LayerSpec::relu(),      LayerSpec::conv(w(75), 3), LayerSpec::relu(),
      LayerSpec::maxpool(2, 2),   LayerSpec::dropout(0.25), LayerSpec::conv(w(125), 3), LayerSpec::relu(),
      LayerSpec::maxpool(2, 2),   LayerSpec::dropout(0.25), LayerSpec::flatten(),      LayerSpec::dense(w(500)),
      LayerSpec::relu(),          LayerSpec::dropout(0.4),  LayerSpec::dense(w(250)),  LayerSpec::relu(),
      LayerSpec::dropout(0.3),    LayerSpec::dense(1),      LayerSpec::sigmoid(),
  };
}

// ---------------------------------------------------------------------------

Network Network::build(std::vector<LayerSpec> specs, Shape3 input, std::uint64_t seed) {
  Network net;
  net.shapes_ = infer_shapes(specs, input);
  net.specs_ = std::move(specs);
  net.seed_ = seed;
  net.params_.resize(net.specs_.size());

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < net.specs_.size(); ++i) {
    const auto& s = net.specs_[i];
    const Shape3 in = net.shapes_[i];
    std::size_t fan_in = 0;
    if (s.kind == LayerKind::Conv) {
      fan_in = static_cast<std::size_t>(in.channels) * s.kernel * s.kernel;
      net.params_[i].weight = Tensor({static_cast<std::size_t>(s.out_channels), static_cast<std::size_t>(in.channels),
                                      static_cast<std::size_t>(s.kernel), static_cast<std::size_t>(s.kernel)});
      net.params_[i].bias = Tensor({static_cast<std::size_t>(s.out_channels)});
    } else if (s.kind == LayerKind::Dense) {
      fan_in = in.size();
      net.params_[i].weight = Tensor({static_cast<std::size_t>(s.width), in.size()});
      net.params_[i].bias = Tensor({static_cast<std::size_t>(s.width)});
    } else {
      continue;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : net.params_[i].weight.data) v = dist(rng);
    for (auto& v : net.params_[i].bias.data) v = dist(rng);
    net.parameter_count_ += net.params_[i].weight.size() + net.params_[i].bias.size();
  }
  return net;
}

Head Network::head() const {
  return specs_.back().kind == LayerKind::Sigmoid ? Head::Sigmoid : Head::Softmax;
}

double Network::temperature() const { return head() == Head::Softmax ? specs_.back().temperature : 1.0; }

void Network::set_temperature(double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be > 0");
  if (head() != Head::Softmax) throw Error(ErrorCode::InvalidArgument, "temperature applies to softmax heads only");
  specs_.back().temperature = t;
}

ParamSet Network::zero_like() const {
  ParamSet z(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    z[i].weight.shape = params_[i].weight.shape;
    z[i].weight.data.assign(params_[i].weight.size(), 0.0);
    z[i].bias.shape = params_[i].bias.shape;
    z[i].bias.data.assign(params_[i].bias.size(), 0.0);
  }
  return z;
}

struct Network::Trace {
  std::vector<std::vector<double>> acts;       // acts[i] is the input of layer i
  std::vector<std::vector<std::size_t>> argmax;  // maxpool source indices
  std::vector<std::vector<double>> keep;        // dropout scale per unit
};

void Network::check_input(const Image& x) const {
  const Shape3 in = input_shape();
  if (x.height != in.height || x.width != in.width || x.channels != in.channels) {
    throw Error(ErrorCode::ShapeMismatch, "input is " + std::to_string(x.height) + "x" + std::to_string(x.width) + "x" +
                                              std::to_string(x.channels) + ", network expects " +
                                              std::to_string(in.height) + "x" + std::to_string(in.width) + "x" +
                                              std::to_string(in.channels));
  }
}

void Network::run_forward(const Image& x, std::uint64_t dropout_seed, Trace& tr) const {
  check_input(x);
  const std::size_t L = specs_.size() - 1;  // the head is applied separately
  tr.acts.assign(L + 1, {});
  tr.argmax.assign(L, {});
  tr.keep.assign(L, {});

  // HWC image -> CHW activations.
  auto& a0 = tr.acts[0];
  a0.resize(x.data.size());
  const int H = x.height, W = x.width, C = x.channels;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      for (int ch = 0; ch < C; ++ch) a0[(static_cast<std::size_t>(ch) * H + r) * W + c] = x.at(r, c, ch);

  for (std::size_t li = 0; li < L; ++li) {
    const LayerSpec& s = specs_[li];
    const Shape3 in = shapes_[li];
    const Shape3 out = shapes_[li + 1];
    const std::vector<double>& src = tr.acts[li];
    std::vector<double>& dst = tr.acts[li + 1];
    switch (s.kind) {
      case LayerKind::Conv: {
        const auto g = conv_geometry(s, in);
        const auto& w = params_[li].weight.data;
        const auto& b = params_[li].bias.data;
        const int k = s.kernel, st = s.stride;
        dst.assign(out.size(), 0.0);
        for (int o = 0; o < out.channels; ++o) {
          double* dplane = dst.data() + static_cast<std::size_t>(o) * out.height * out.width;
          std::fill(dplane, dplane + static_cast<std::size_t>(out.height) * out.width, b[o]);
          for (int ci = 0; ci < in.channels; ++ci) {
            const double* splane = src.data() + static_cast<std::size_t>(ci) * in.height * in.width;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const double wv = w[((static_cast<std::size_t>(o) * in.channels + ci) * k + ky) * k + kx];
                const auto [x_lo, x_hi] = valid_columns(kx, g.pad_left, st, in.width, out.width);
                const int shift = kx - g.pad_left;
                for (int oy = 0; oy < out.height; ++oy) {
                  const int iy = oy * st + ky - g.pad_top;
                  if (iy < 0 || iy >= in.height) continue;
                  double* drow = dplane + static_cast<std::size_t>(oy) * out.width;
                  const double* srow = splane + static_cast<std::size_t>(iy) * in.width;
                  for (int ox = x_lo; ox < x_hi; ++ox) drow[ox] += wv * srow[ox * st + shift];
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::Relu:
        dst.resize(src.size());
        std::transform(src.begin(), src.end(), dst.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
        break;
      case LayerKind::MaxPool: {
        dst.assign(out.size(), 0.0);
        auto& am = tr.argmax[li];
        am.assign(out.size(), 0);
        for (int ch = 0; ch < out.channels; ++ch)
          for (int oy = 0; oy < out.height; ++oy)
            for (int ox = 0; ox < out.width; ++ox) {
              double best = -std::numeric_limits<double>::infinity();
              std::size_t best_i = 0;
              for (int wy = 0; wy < s.window; ++wy)
                for (int wx = 0; wx < s.window; ++wx) {
                  const std::size_t idx =
                      (static_cast<std::size_t>(ch) * in.height + oy * s.stride + wy) * in.width + ox * s.stride + wx;
                  if (src[idx] > best) {
                    best = src[idx];
                    best_i = idx;
                  }
                }
              const std::size_t o = (static_cast<std::size_t>(ch) * out.height + oy) * out.width + ox;
              dst[o] = best;
              am[o] = best_i;
            }
        break;
      }
      case LayerKind::Dropout: {
        if (mode_ == Mode::Eval || s.rate == 0.0) {
          dst = src;
          break;
        }
        auto& keep = tr.keep[li];
        keep.resize(src.size());
        std::mt19937_64 rng(mix_seed(dropout_seed, li));
        std::bernoulli_distribution drop(s.rate);
        const double scale = 1.0 / (1.0 - s.rate);
        for (auto& v : keep) v = drop(rng) ? 0.0 : scale;
        dst.resize(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * keep[i];
        break;
      }
      case LayerKind::Flatten:
        dst = src;
        break;
      case LayerKind::Dense: {
        const auto& w = params_[li].weight.data;
        const auto& b = params_[li].bias.data;
        const std::size_t n_in = src.size();
        dst.resize(out.size());
        for (int o = 0; o < out.channels; ++o) {
          const double* wrow = w.data() + static_cast<std::size_t>(o) * n_in;
          double acc = b[o];
          for (std::size_t i = 0; i < n_in; ++i) acc += wrow[i] * src[i];
          dst[o] = acc;
        }
        break;
      }
      case LayerKind::Sigmoid:
      case LayerKind::Softmax:
        break;
    }
  }
}

std::vector<double> Network::run_backward(const Trace& tr, std::vector<double> grad, ParamSet* grads) const {
  const std::size_t L = specs_.size() - 1;
  std::vector<double> next;
  for (std::size_t li = L; li-- > 0;) {
    const LayerSpec& s = specs_[li];
    const Shape3 in = shapes_[li];
    const Shape3 out = shapes_[li + 1];
    const std::vector<double>& src = tr.acts[li];
    switch (s.kind) {
      case LayerKind::Conv: {
        const auto g = conv_geometry(s, in);
        const auto& w = params_[li].weight.data;
        const int k = s.kernel, st = s.stride;
        next.assign(in.size(), 0.0);
        double* dw = grads ? (*grads)[li].weight.data.data() : nullptr;
        double* db = grads ? (*grads)[li].bias.data.data() : nullptr;
        for (int o = 0; o < out.channels; ++o) {
          const double* gplane = grad.data() + static_cast<std::size_t>(o) * out.height * out.width;
          if (db) {
            double acc = 0.0;
            for (std::size_t i = 0; i < static_cast<std::size_t>(out.height) * out.width; ++i) acc += gplane[i];
            db[o] += acc;
          }
          for (int ci = 0; ci < in.channels; ++ci) {
            const double* splane = src.data() + static_cast<std::size_t>(ci) * in.height * in.width;
            double* nplane = next.data() + static_cast<std::size_t>(ci) * in.height * in.width;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const std::size_t widx = ((static_cast<std::size_t>(o) * in.channels + ci) * k + ky) * k + kx;
                const double wv = w[widx];
                const auto [x_lo, x_hi] = valid_columns(kx, g.pad_left, st, in.width, out.width);
                const int shift = kx - g.pad_left;
                double wacc = 0.0;
                for (int oy = 0; oy < out.height; ++oy) {
                  const int iy = oy * st + ky - g.pad_top;
                  if (iy < 0 || iy >= in.height) continue;
                  const double* grow = gplane + static_cast<std::size_t>(oy) * out.width;
                  const double* srow = splane + static_cast<std::size_t>(iy) * in.width;
                  double* nrow = nplane + static_cast<std::size_t>(iy) * in.width;
                  for (int ox = x_lo; ox < x_hi; ++ox) {
                    wacc += grow[ox] * srow[ox * st + shift];
                    nrow[ox * st + shift] += wv * grow[ox];
                  }
                }
                if (dw) dw[widx] += wacc;
              }
            }
          }
        }
        break;
      }
      case LayerKind::Relu:
        next.resize(grad.size());
        for (std::size_t i = 0; i < grad.size(); ++i) next[i] = src[i] > 0.0 ? grad[i] : 0.0;
        break;
      case LayerKind::MaxPool: {
        next.assign(in.size(), 0.0);
        const auto& am = tr.argmax[li];
        for (std::size_t o = 0; o < grad.size(); ++o) next[am[o]] += grad[o];
        break;
      }
      case LayerKind::Dropout: {
        if (mode_ == Mode::Eval || s.rate == 0.0) {
          next = grad;
          break;
        }
        const auto& keep = tr.keep[li];
        next.resize(grad.size());
        for (std::size_t i = 0; i < grad.size(); ++i) next[i] = grad[i] * keep[i];
        break;
      }
      case LayerKind::Flatten:
        next = grad;
        break;
      case LayerKind::Dense: {
        const auto& w = params_[li].weight.data;
        const std::size_t n_in = src.size();
        next.assign(n_in, 0.0);
        for (int o = 0; o < out.channels; ++o) {
          const double go = grad[o];
          if (go == 0.0) continue;
          const double* wrow = w.data() + static_cast<std::size_t>(o) * n_in;
          for (std::size_t i = 0; i < n_in; ++i) next[i] += wrow[i] * go;
          if (grads) {
            double* dwrow = (*grads)[li].weight.data.data() + static_cast<std::size_t>(o) * n_in;
            for (std::size_t i = 0; i < n_in; ++i) dwrow[i] += go * src[i];
            (*grads)[li].bias.data[o] += go;
          }
        }
        break;
      }
      case LayerKind::Sigmoid:
      case LayerKind::Softmax:
        next = grad;
        break;
    }
    grad.swap(next);
  }
  return grad;
}

std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "temperature must be > 0");
  if (logits.empty()) return {};
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - zmax) / temperature);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<double> Network::output_from_logits(const std::vector<double>& z) const {
  if (head() == Head::Sigmoid) return {1.0 / (1.0 + std::exp(-z[0]))};
  return softmax_with_temperature(z, temperature());
}

void Network::check_target(const Target& target) const {
  const std::size_t want = head() == Head::Sigmoid ? 1 : static_cast<std::size_t>(num_outputs());
  if (target.size() != want) throw Error(ErrorCode::InvalidLabel, "target has wrong arity for this head");
  double sum = 0.0;
  for (double v : target) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidLabel, "target values must lie in [0,1]");
    sum += v;
  }
  if (head() == Head::Softmax && std::abs(sum - 1.0) > 1e-6) {
    throw Error(ErrorCode::InvalidLabel, "softmax target must sum to 1");
  }
}

Target Network::hard_target(int label) const {
  if (head() == Head::Sigmoid) {
    if (label != 0 && label != 1) throw Error(ErrorCode::InvalidLabel, "binary label must be 0 or 1");
    return {static_cast<double>(label)};
  }
  if (label < 0 || label >= num_outputs()) throw Error(ErrorCode::InvalidLabel, "class index out of range");
  Target t(static_cast<std::size_t>(num_outputs()), 0.0);
  t[static_cast<std::size_t>(label)] = 1.0;
  return t;
}

double Network::loss_from_logits(const std::vector<double>& z, const Target& target) const {
  const auto p = output_from_logits(z);
  double j = 0.0;
  if (head() == Head::Sigmoid) {
    const double q = std::clamp(p[0], kProbClamp, 1.0 - kProbClamp);
    j = -(target[0] * std::log(q) + (1.0 - target[0]) * std::log(1.0 - q));
  } else {
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (target[k] > 0.0) j -= target[k] * std::log(std::clamp(p[k], kProbClamp, 1.0 - kProbClamp));
    }
  }
  return j;
}

// dJ/dz of the unclamped cross-entropy; agrees with the clamped loss wherever
// the clamp is inactive and stays informative on saturated outputs.
std::vector<double> Network::loss_logit_gradient(const std::vector<double>& z, const Target& target) const {
  if (head() == Head::Sigmoid) {
    // p - y written so that neither branch cancels catastrophically.
    const double y = target[0];
    const double p = 1.0 / (1.0 + std::exp(-z[0]));
    const double one_minus_p = 1.0 / (1.0 + std::exp(z[0]));
    return {(1.0 - y) * p - y * one_minus_p};
  }
  const double T = temperature();
  const auto p = softmax_with_temperature(z, T);
  std::vector<double> g(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) g[k] = (p[k] - target[k]) / T;
  return g;
}

std::vector<double> Network::logits(const Image& x, std::uint64_t dropout_seed) const {
  Trace tr;
  run_forward(x, dropout_seed, tr);
  return tr.acts.back();
}

std::vector<double> Network::forward(const Image& x, std::uint64_t dropout_seed) const {
  return output_from_logits(logits(x, dropout_seed));
}

int Network::predict(const Image& x) const {
  const auto z = logits(x);
  if (head() == Head::Sigmoid) return z[0] >= 0.0 ? 1 : 0;
  if (z.size() == 2) return z[1] >= z[0] ? 1 : 0;
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double Network::score(const Image& x) const {
  const auto p = forward(x);
  return head() == Head::Sigmoid ? p[0] : p[1];
}

double Network::loss(const Image& x, const Target& target, std::uint64_t dropout_seed) const {
  check_target(target);
  return loss_from_logits(logits(x, dropout_seed), target);
}

namespace {

Tensor chw_to_hwc(const std::vector<double>& g, Shape3 s) {
  Tensor t({static_cast<std::size_t>(s.height), static_cast<std::size_t>(s.width), static_cast<std::size_t>(s.channels)});
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c)
      for (int ch = 0; ch < s.channels; ++ch)
        t.data[(static_cast<std::size_t>(r) * s.width + c) * s.channels + ch] =
            g[(static_cast<std::size_t>(ch) * s.height + r) * s.width + c];
  return t;
}

}  // namespace

Tensor Network::input_gradient(const Image& x, const Target& target) const {
  check_target(target);
  Trace tr;
  run_forward(x, 0, tr);
  return chw_to_hwc(run_backward(tr, loss_logit_gradient(tr.acts.back(), target), nullptr), input_shape());
}

Tensor Network::logit_gradient(const Image& x, const std::vector<double>& seed) const {
  if (seed.size() != static_cast<std::size_t>(num_outputs())) {
    throw Error(ErrorCode::ShapeMismatch, "logit seed has wrong length");
  }
  Trace tr;
  run_forward(x, 0, tr);
  return chw_to_hwc(run_backward(tr, seed, nullptr), input_shape());
}

double Network::accumulate_gradients(const Image& x, const Target& target, ParamSet& grads,
                                     std::uint64_t dropout_seed, std::vector<double>* outputs) const {
  check_target(target);
  Trace tr;
  run_forward(x, dropout_seed, tr);
  const auto& z = tr.acts.back();
  if (outputs) *outputs = output_from_logits(z);
  const double j = loss_from_logits(z, target);
  run_backward(tr, loss_logit_gradient(z, target), &grads);
  return j;
}

ParamSet param_gradients(const Network& net, const std::vector<Image>& images, const std::vector<Target>& targets,
                         std::uint64_t dropout_seed) {
  if (images.empty()) throw Error(ErrorCode::EmptyBatch, "parameter gradient needs at least one sample");
  if (images.size() != targets.size()) throw Error(ErrorCode::DimensionMismatch, "images and targets differ in length");
  ParamSet g = net.zero_like();
  for (std::size_t i = 0; i < images.size(); ++i) net.accumulate_gradients(images[i], targets[i], g, dropout_seed + i);
  const double inv = 1.0 / static_cast<double>(images.size());
  for (auto& lp : g) {
    for (auto& v : lp.weight.data) v *= inv;
    for (auto& v : lp.bias.data) v *= inv;
  }
  return g;
}

ParamSet param_gradients(const Network& net, const std::vector<Image>& images, const std::vector<int>& labels) {
  std::vector<Target> targets;
  targets.reserve(labels.size());
  for (int y : labels) targets.push_back(net.hard_target(y));
  return param_gradients(net, images, targets);
}

}  // namespace kryptolab::gradnet
