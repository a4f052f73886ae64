#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kryptolab/error.hpp"
#include "kryptolab/network.hpp"

namespace kryptolab::gradnet {

LossKind loss_for(const Network& net) {
  return net.head() == Head::Sigmoid ? LossKind::BinaryCrossEntropy : LossKind::CrossEntropy;
}

namespace {

int argmax_label(const Network& net, const std::vector<double>& out) {
  if (net.head() == Head::Sigmoid) return out[0] >= 0.5 ? 1 : 0;
  return static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
}

}  // namespace

std::vector<EpochStats> train(Network& net, std::vector<Image> images, const std::vector<Target>& targets,
                              const TrainConfig& cfg, const EpochHook& hook) {
  if (images.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (images.size() != targets.size()) throw Error(ErrorCode::DimensionMismatch, "images and targets differ in length");
  if (!(cfg.learning_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be non-negative");
  if (cfg.batch_size < 1 || cfg.epochs < 0) throw Error(ErrorCode::InvalidArgument, "bad batch size or epoch count");
  if (!(cfg.clip_norm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "clip norm must be non-negative");
  if (cfg.loss && *cfg.loss != loss_for(net)) {
    throw Error(ErrorCode::InvalidArgument, "loss kind does not match the network head");
  }

  const Mode saved = net.mode();
  net.set_mode(Mode::Train);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<EpochStats> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (hook) {
      net.set_mode(Mode::Eval);
      hook(epoch, net, images);
      net.set_mode(Mode::Train);
    }
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ParamSet grads = net.zero_like();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        const std::uint64_t drop_seed = rng();
        std::vector<double> out;
        loss_sum += net.accumulate_gradients(images[i], targets[i], grads, drop_seed, &out);
        const int want = net.head() == Head::Sigmoid ? (targets[i][0] >= 0.5 ? 1 : 0)
                                                      : argmax_label(net, targets[i]);
        if (argmax_label(net, out) == want) ++correct;
      }
      double step = cfg.learning_rate / static_cast<double>(stop - start);
      if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& g : grads) {
          for (double v : g.weight.data) sq += v * v;
          for (double v : g.bias.data) sq += v * v;
        }
        const double norm = std::sqrt(sq) / static_cast<double>(stop - start);
        if (norm > cfg.clip_norm) step *= cfg.clip_norm / norm;
      }
      auto& params = net.params();
      for (std::size_t li = 0; li < params.size(); ++li) {
        for (std::size_t j = 0; j < params[li].weight.size(); ++j) params[li].weight.data[j] -= step * grads[li].weight.data[j];
        for (std::size_t j = 0; j < params[li].bias.size(); ++j) params[li].bias.data[j] -= step * grads[li].bias.data[j];
      }
    }
    history.push_back({epoch, loss_sum / static_cast<double>(images.size()),
                       static_cast<double>(correct) / static_cast<double>(images.size())});
  }
  net.set_mode(saved);
  return history;
}

std::vector<EpochStats> train(Network& net, const std::vector<Image>& images, const std::vector<int>& labels,
                              const TrainConfig& cfg, const EpochHook& hook) {
  std::vector<Target> targets;
  targets.reserve(labels.size());
  for (int y : labels) targets.push_back(net.hard_target(y));
  return train(net, images, targets, cfg, hook);
}

}  // namespace kryptolab::gradnet
