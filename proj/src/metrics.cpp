#include "kryptolab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kryptolab/error.hpp"

namespace kryptolab::metrics {

double lp_norm(const Image& a, const Image& b, double p) {
  if (!a.same_shape(b) || a.data.size() != b.data.size()) {
    throw Error(ErrorCode::DimensionMismatch, "lp_norm operands differ in shape");
  }
  if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "norm order must be >= 1");
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
  }
  double s = 0.0;
  if (p == 1.0) {
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s;
  }
  if (p == 2.0) {
    for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(s);
  }
  for (std::size_t i = 0; i < a.data.size(); ++i) s += std::pow(std::abs(a.data[i] - b.data[i]), p);
  return std::pow(s, 1.0 / p);
}

double perturbation_percent(const Image& x, const Image& adv) {
  const double denom = lp_norm(x, Image(x.height, x.width, x.channels, 0.0), 2.0);
  if (denom == 0.0) throw Error(ErrorCode::ZeroImage, "perturbation percentage undefined for an all-zero image");
  return 100.0 * lp_norm(adv, x, 2.0) / denom;
}

double accuracy(const std::vector<double>& predictions, const std::vector<int>& labels, double threshold) {
  if (predictions.empty()) throw Error(ErrorCode::EmptySet, "accuracy of an empty set");
  if (predictions.size() != labels.size()) throw Error(ErrorCode::DimensionMismatch, "predictions and labels differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int pred = predictions[i] >= threshold ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

double roc_auc(const std::vector<ScoredSample>& samples) {
  std::size_t pos = 0;
  for (const auto& s : samples) {
    if (s.label != 0 && s.label != 1) throw Error(ErrorCode::BadLabel, "ROC labels must be 0 or 1");
    if (!std::isfinite(s.score)) throw Error(ErrorCode::InvalidArgument, "ROC scores must be finite");
    pos += static_cast<std::size_t>(s.label);
  }
  const std::size_t neg = samples.size() - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::SingleClass, "ROC-AUC needs both classes");

  std::vector<ScoredSample> sorted = samples;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  // Rank-sum of the positives with midranks for ties.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      pos_in_group += static_cast<std::size_t>(sorted[j].label);
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += midrank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(neg));
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::DimensionMismatch, "pearson needs paired samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace kryptolab::metrics
