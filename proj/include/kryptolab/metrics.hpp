#pragma once

#include <limits>
#include <vector>

#include "kryptolab/image.hpp"

namespace kryptolab::metrics {

struct ScoredSample {
  double score = 0.0;
  int label = 0;  // 0 or 1
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// (sum |a - b|^p)^(1/p); p = kInfinity gives the max absolute difference.
double lp_norm(const Image& a, const Image& b, double p);

/// 100 * ||adv - x||_2 / ||x||_2. Throws ZeroImage for an all-zero x.
double perturbation_percent(const Image& x, const Image& adv);

/// Fraction of predictions (probabilities of class 1) on the right side of
/// `threshold`; a score equal to the threshold counts as class 1.
double accuracy(const std::vector<double>& predictions, const std::vector<int>& labels, double threshold = 0.5);

/// Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie).
double roc_auc(const std::vector<ScoredSample>& samples);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace kryptolab::metrics
