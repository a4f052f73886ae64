#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kryptolab/image.hpp"
#include "kryptolab/network.hpp"

namespace kryptolab::attacks {

using gradnet::Network;
using gradnet::Tensor;

enum class AttackKind { Fgsm, Ifgsm, Pgd, Mifgsm, DeepFool, Kryptonite, KryptoniteMasked };

std::string to_string(AttackKind kind);
/// Accepts the names produced by to_string ("fgsm", "deepfool", ...).
AttackKind parse_attack(std::string_view name);

struct AttackConfig {
  double epsilon = 0.03;          // L-infinity budget
  int iterations = 10;            // T
  std::optional<double> alpha;    // step; epsilon / T when unset
  double decay_weight = 0.5;      // omega, Kryptonite only
  double initial_decay = 0.5;     // mu_0; the fixed decay of MI-FGSM
  double overshoot = 0.02;        // DeepFool eta
  int kernel_size = 5;            // RoI dilation kernel
  std::uint64_t seed = 0;         // PGD random start
  bool reextract_roi = false;     // Kryptonite: recompute the RoI on every iterate

  double step() const { return alpha ? *alpha : epsilon / iterations; }
  void validate() const;
};

/// Floor on the RoI progress before it divides the decay weight.
inline constexpr double kProgressFloor = 1e-8;

struct MomentumState {
  Tensor g;              // accumulated direction g_t
  double mu = 0.0;       // decay used for the next accumulation
  double progress = 0.0; // last P
};

struct AttackResult {
  Image adversarial;
  double linf = 0.0;
  double l2_percent = 0.0;
  int iterations_used = 0;
  bool success = false;   // predicted label differs from the reference label
  double elapsed = 0.0;   // seconds
};

/// Called with every iterate x*_t for t = 1..T (after the update). Momentum
/// attacks pass their state after the step; the others pass nullptr.
using IterateObserver = std::function<void(int t, const Image& iterate, const MomentumState* state)>;

/// Per-pixel projection into [x - eps, x + eps] intersected with [0, 1].
Image clip_to_ball(const Image& candidate, const Image& x, double eps);

AttackResult fgsm(const Network& net, const Image& x, int y, const AttackConfig& cfg);
AttackResult ifgsm(const Network& net, const Image& x, int y, const AttackConfig& cfg,
                   const IterateObserver& observe = {});
AttackResult pgd(const Network& net, const Image& x, int y, const AttackConfig& cfg,
                 const IterateObserver& observe = {});
/// Fixed decay mu = cfg.initial_decay. Throws ZeroGradient on a flat loss.
AttackResult mifgsm(const Network& net, const Image& x, int y, const AttackConfig& cfg,
                    const IterateObserver& observe = {});
/// Binary heads only. Iterates are clipped into the epsilon ball; success
/// reports whether the prediction flipped.
AttackResult deepfool_linf(const Network& net, const Image& x, const AttackConfig& cfg,
                           const IterateObserver& observe = {});

/// ||rho_next - rho_prev||_2 over two RoI-masked iterates.
double roi_progress(const Image& rho_prev, const Image& rho_next);

/// Momentum iterative attack whose decay follows the progress inside the RoI:
/// mu_{t+1} = omega / max(P, kProgressFloor). Every pixel receives the sign step.
AttackResult kryptonite(const Network& net, const Image& x, int y, const RoIMask& roi, const AttackConfig& cfg,
                        const IterateObserver& observe = {});
/// Same recurrence with the sign step zeroed outside the RoI.
AttackResult kryptonite_masked(const Network& net, const Image& x, int y, const RoIMask& roi,
                               const AttackConfig& cfg, const IterateObserver& observe = {});

/// Dispatches on kind; Kryptonite variants extract the RoI from x first and
/// the reported elapsed time includes that extraction.
AttackResult run_attack(AttackKind kind, const Network& net, const Image& x, int y, const AttackConfig& cfg);

}  // namespace kryptolab::attacks
