#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kryptolab/attacks.hpp"
#include "kryptolab/image.hpp"
#include "kryptolab/network.hpp"

namespace kryptolab::defences {

using gradnet::Network;

enum class DefenceKind { AdvTrain, PixelDeflect, Distill };

std::string to_string(DefenceKind kind);
DefenceKind parse_defence(std::string_view name);

/// When adversarial-training samples are regenerated.
enum class RegenSchedule { PerEpoch, Once };

struct DefenceConfig {
  DefenceKind kind = DefenceKind::AdvTrain;
  double adversarial_fraction = 0.65;
  int deflections = 120;
  int window = 10;          // deflection neighbourhood radius
  bool denoise = true;      // 3x3 median after deflection
  double temperature = 20.0;
  std::uint64_t seed = 0;
  attacks::AttackKind attack = attacks::AttackKind::Fgsm;
  attacks::AttackConfig attack_config;
  RegenSchedule schedule = RegenSchedule::PerEpoch;
  bool warm_start = true;   // adversarial training starts from the base weights

  void validate() const;
};

/// Trains a fresh copy of `base` (same specs and initialization seed) on a mix
/// where round(fraction * n) seeded-chosen samples are replaced by adversaries.
/// The first batch of adversaries targets `base`; later epochs target the
/// network being trained unless the schedule is Once.
Network adversarial_train(const Network& base, const std::vector<Image>& images, const std::vector<int>& labels,
                          const gradnet::TrainConfig& train_cfg, const DefenceConfig& cfg);

/// |dJ/dx| at the predicted label, max over channels, scaled to [0, 1]. H x W x 1.
Image saliency_map(const Network& net, const Image& x);

/// Replaces `deflections` pixels, drawn with weight 1 - saliency, by a random
/// pixel from their window, then median-filters each channel when enabled.
Image pixel_deflect(const Image& x, const Image& saliency, const DefenceConfig& cfg);

/// Per-channel 3x3 median with edge replication.
Image median3x3(const Image& x);

/// Specs whose head is a softmax at temperature T. A sigmoid head (dense 1 +
/// sigmoid) becomes dense 2 + softmax.
std::vector<gradnet::LayerSpec> softmax_head_specs(std::vector<gradnet::LayerSpec> specs, double temperature);

/// Teacher probabilities at temperature T; the network's temperature is restored.
std::vector<gradnet::Target> soft_labels(Network& teacher, const std::vector<Image>& images, double temperature);

double entropy(const std::vector<double>& p);

struct DistillResult {
  Network teacher;
  Network student;  // left at temperature 1
  std::vector<gradnet::Target> soft_labels;
};

DistillResult distill(const std::vector<gradnet::LayerSpec>& teacher_specs, gradnet::Shape3 input,
                      const std::vector<Image>& images, const std::vector<int>& labels,
                      const gradnet::TrainConfig& train_cfg, const DefenceConfig& cfg);

}  // namespace kryptolab::defences
