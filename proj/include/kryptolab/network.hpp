#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kryptolab/image.hpp"

namespace kryptolab::gradnet {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

enum class LayerKind : std::uint8_t { Conv, Relu, MaxPool, Dropout, Flatten, Dense, Sigmoid, Softmax };
enum class Padding : std::uint8_t { Same, Valid };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int out_channels = 0;  // conv
  int kernel = 3;        // conv
  Padding padding = Padding::Same;
  int stride = 1;        // conv and maxpool
  int window = 2;        // maxpool
  double rate = 0.0;     // dropout
  int width = 0;         // dense
  double temperature = 1.0;  // softmax

  static LayerSpec conv(int out_channels, int kernel, int stride = 1, Padding pad = Padding::Same);
  static LayerSpec relu();
  static LayerSpec maxpool(int window, int stride);
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec dense(int width);
  static LayerSpec sigmoid();
  static LayerSpec softmax(double temperature = 1.0);

  bool operator==(const LayerSpec&) const = default;
};

/// Activation shape in channel-major order. Flattened activations are (n, 1, 1).
struct Shape3 {
  int channels = 1;
  int height = 1;
  int width = 1;
  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
  bool operator==(const Shape3&) const = default;
};

enum class Mode { Train, Eval };
enum class Head { Sigmoid, Softmax };

struct LayerParams {
  Tensor weight;
  Tensor bias;
  bool operator==(const LayerParams&) const = default;
};

/// Per-layer parameter tensors; layers without parameters hold empty tensors.
using ParamSet = std::vector<LayerParams>;

/// Target distribution over the network outputs. A sigmoid head takes one
/// value in [0,1]; a softmax head takes one probability per class.
using Target = std::vector<double>;

/// Shapes after every layer, starting with the input. Throws ShapeMismatch
/// naming the offending layer index.
std::vector<Shape3> infer_shapes(const std::vector<LayerSpec>& specs, Shape3 input);
std::size_t count_parameters(const std::vector<LayerSpec>& specs, Shape3 input);

/// The custom CNN stack: 50/75/125-channel 3x3 convolutions, two 2x2 pools,
/// dense 500/250/1 with dropout 0.25/0.25/0.4/0.3.
std::vector<LayerSpec> reference_cnn_specs();

/// Same topology with every width divided by `divisor` (at least one unit).
std::vector<LayerSpec> scaled_cnn_specs(int divisor);

class Network {
 public:
  static Network build(std::vector<LayerSpec> specs, Shape3 input, std::uint64_t seed);

  const std::vector<LayerSpec>& specs() const { return specs_; }
  Shape3 input_shape() const { return shapes_.front(); }
  const std::vector<Shape3>& shapes() const { return shapes_; }
  std::size_t parameter_count() const { return parameter_count_; }
  std::uint64_t seed() const { return seed_; }
  Head head() const;
  int num_outputs() const { return static_cast<int>(shapes_[shapes_.size() - 2].size()); }
  double temperature() const;
  void set_temperature(double t);

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  ParamSet zero_like() const;

  /// Pre-head outputs. In train mode, `dropout_seed` fixes the dropout masks.
  std::vector<double> logits(const Image& x, std::uint64_t dropout_seed = 0) const;
  /// Sigmoid head: {p(class 1)}; softmax head: the class probabilities.
  std::vector<double> forward(const Image& x, std::uint64_t dropout_seed = 0) const;
  int predict(const Image& x) const;
  /// Probability of class 1 for binary heads (either head form).
  double score(const Image& x) const;

  Target hard_target(int label) const;
  double loss(const Image& x, const Target& target, std::uint64_t dropout_seed = 0) const;
  double loss(const Image& x, int label) const { return loss(x, hard_target(label)); }

  /// dJ/dx laid out exactly like x.data (shape {H, W, C}).
  Tensor input_gradient(const Image& x, const Target& target) const;
  Tensor input_gradient(const Image& x, int label) const { return input_gradient(x, hard_target(label)); }

  /// Gradient of sum_k seed[k] * logit_k with respect to the input.
  Tensor logit_gradient(const Image& x, const std::vector<double>& seed) const;

  /// Adds dJ/dtheta for one sample into `grads` and returns the loss. The
  /// head outputs of that same pass are written to `outputs` when given.
  double accumulate_gradients(const Image& x, const Target& target, ParamSet& grads, std::uint64_t dropout_seed = 0,
                              std::vector<double>* outputs = nullptr) const;

 private:
  struct Trace;
  void check_input(const Image& x) const;
  void run_forward(const Image& x, std::uint64_t dropout_seed, Trace& tr) const;
  std::vector<double> run_backward(const Trace& tr, std::vector<double> grad, ParamSet* grads) const;
  std::vector<double> output_from_logits(const std::vector<double>& z) const;
  std::vector<double> loss_logit_gradient(const std::vector<double>& z, const Target& target) const;
  double loss_from_logits(const std::vector<double>& z, const Target& target) const;
  void check_target(const Target& target) const;

  std::vector<LayerSpec> specs_;
  std::vector<Shape3> shapes_;
  ParamSet params_;
  std::size_t parameter_count_ = 0;
  std::uint64_t seed_ = 0;
  Mode mode_ = Mode::Eval;
};

/// Mean parameter gradient over a nonempty batch. Throws EmptyBatch.
ParamSet param_gradients(const Network& net, const std::vector<Image>& images, const std::vector<Target>& targets,
                         std::uint64_t dropout_seed = 0);
ParamSet param_gradients(const Network& net, const std::vector<Image>& images, const std::vector<int>& labels);

std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double temperature);

// --------------------------------------------------------------------------
// Training

enum class LossKind { BinaryCrossEntropy, CrossEntropy };

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;  // cap on the global norm of each batch gradient; 0 disables
  std::optional<LossKind> loss;  // inferred from the head when unset
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Invoked before every epoch; may rewrite the training images in place.
using EpochHook = std::function<void(int epoch, const Network& net, std::vector<Image>& images)>;

/// Plain minibatch SGD. Deterministic for a fixed cfg.seed. Throws EmptyDataset.
std::vector<EpochStats> train(Network& net, std::vector<Image> images, const std::vector<Target>& targets,
                              const TrainConfig& cfg, const EpochHook& hook = {});
std::vector<EpochStats> train(Network& net, const std::vector<Image>& images, const std::vector<int>& labels,
                              const TrainConfig& cfg, const EpochHook& hook = {});

LossKind loss_for(const Network& net);

// --------------------------------------------------------------------------
// Serialization: binary container plus "<path>.json" sidecar.

void save(const Network& net, const std::filesystem::path& path);
Network load(const std::filesystem::path& path);

}  // namespace kryptolab::gradnet
