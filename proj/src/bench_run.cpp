#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "kryptolab/bench.hpp"
#include "kryptolab/error.hpp"
#include "kryptolab/metrics.hpp"

namespace kryptolab::bench {

namespace {

using Clock = std::chrono::steady_clock;

double auc_or_nan(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<metrics::ScoredSample> s;
  s.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) s.push_back({scores[i], labels[i]});
  try {
    return metrics::roc_auc(s);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingleClass) throw;
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::string network_label(const ExperimentConfig& cfg) {
  if (!cfg.network.model.empty()) return cfg.network.model;
  if (!cfg.network.layers.empty()) return "custom";
  if (cfg.network.name == "scaled") return "scaled/" + std::to_string(cfg.network.divisor);
  return cfg.network.name;
}

gradnet::TrainConfig trial_train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  gradnet::TrainConfig t = cfg.train;
  t.seed = cfg.train.seed ^ seed;
  return t;
}

// Stage context for errors raised deep inside a run.
template <class F>
auto in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), stage + ": " + e.what());
  }
}

std::vector<ReportRow> mean_rows(const std::vector<ReportRow>& rows) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.attack, r.defence);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<ReportRow> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    const double n = static_cast<double>(g.size());
    ReportRow m;
    m.attack = key.first;
    m.defence = key.second;
    m.network = g.front()->network;
    m.trial = -1;
    for (const auto* r : g) {
      m.clean_accuracy += r->clean_accuracy / n;
      m.adv_accuracy += r->adv_accuracy / n;
      m.clean_auc += r->clean_auc / n;
      m.adv_auc += r->adv_auc / n;
      m.pert_mean += r->pert_mean / n;
      m.pert_worst = std::max(m.pert_worst, r->pert_worst);
      m.linf_max = std::max(m.linf_max, r->linf_max);
      m.seconds_per_sample += r->seconds_per_sample / n;
      m.samples += r->samples;
      m.failures += r->failures;
    }
    out.push_back(std::move(m));
  }
  return out;
}

void set_axis(attacks::AttackConfig& c, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::Epsilon: c.epsilon = v; break;
    case SweepAxis::DecayWeight: c.decay_weight = v; break;
    case SweepAxis::Overshoot: c.overshoot = v; break;
  }
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(trial + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TrialSetup prepare_trial(const ExperimentConfig& cfg, int trial) {
  const std::uint64_t seed = trial_seed(cfg.seed, trial);
  Dataset data = in_stage("data", [&] {
    if (!cfg.data.manifest.empty()) return load_dataset(cfg.data.manifest);
    return dataset_from_samples(synth_samples(cfg.data.count, cfg.data.size, seed, cfg.data.channels), cfg.data.split,
                                seed);
  });
  const Image& first = data.images.front();
  const gradnet::Shape3 shape{first.channels, first.height, first.width};
  gradnet::Network net = in_stage("train", [&] {
    if (!cfg.network.model.empty()) return gradnet::load(cfg.network.model);
    auto n = gradnet::Network::build(network_specs(cfg.network), shape, seed);
    gradnet::train(n, data.images_of(data.split.train), data.labels_of(data.split.train),
                   trial_train_config(cfg, seed));
    return n;
  });
  std::vector<std::size_t> test = data.split.test;
  if (cfg.test_limit > 0 && test.size() > static_cast<std::size_t>(cfg.test_limit)) {
    test.resize(static_cast<std::size_t>(cfg.test_limit));
  }
  if (test.empty()) throw Error(ErrorCode::EmptySet, "test split is empty");
  return {std::move(net), std::move(data), std::move(test), seed};
}

AttackOutcome evaluate_attack(const gradnet::Network& net, const TrialSetup& setup, const AttackEntry& attack,
                              const Transform& transform) {
  AttackOutcome out;
  std::vector<double> clean_scores, adv_scores;
  std::vector<int> labels;
  double pert_sum = 0.0, seconds = 0.0;
  for (std::size_t i : setup.test) {
    const Image& x = setup.data.images[i];
    const int y = setup.data.labels[i];
    const auto start = Clock::now();
    attacks::AttackResult r;
    try {
      r = attacks::run_attack(attack.kind, net, x, y, attack.config);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroGradient) throw;
      r.adversarial = x;
      ++out.row.failures;
    }
    seconds += std::chrono::duration<double>(Clock::now() - start).count();
    r.linf = metrics::lp_norm(x, r.adversarial, metrics::kInfinity);
    r.l2_percent = metrics::perturbation_percent(x, r.adversarial);
    pert_sum += r.l2_percent;
    out.row.pert_worst = std::max(out.row.pert_worst, r.l2_percent);
    out.row.linf_max = std::max(out.row.linf_max, r.linf);
    clean_scores.push_back(net.score(transform ? transform(x) : x));
    adv_scores.push_back(net.score(transform ? transform(r.adversarial) : r.adversarial));
    labels.push_back(y);
    out.results.push_back(std::move(r));
  }
  const double n = static_cast<double>(labels.size());
  out.row.attack = attacks::to_string(attack.kind);
  out.row.samples = static_cast<int>(labels.size());
  out.row.clean_accuracy = metrics::accuracy(clean_scores, labels);
  out.row.adv_accuracy = metrics::accuracy(adv_scores, labels);
  out.row.clean_auc = auc_or_nan(clean_scores, labels);
  out.row.adv_auc = auc_or_nan(adv_scores, labels);
  out.row.pert_mean = pert_sum / n;
  out.row.seconds_per_sample = seconds / n;
  return out;
}

std::vector<ReportRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.attacks.empty()) throw Error(ErrorCode::InvalidArgument, "experiment lists no attacks");
  const std::string net_name = network_label(cfg);
  std::vector<ReportRow> rows;
  for (int k = 0; k < cfg.trials; ++k) {
    const std::string ctx = "trial " + std::to_string(k);
    TrialSetup setup = prepare_trial(cfg, k);
    auto push = [&](ReportRow r, const std::string& defence) {
      r.trial = k;
      r.network = net_name;
      r.defence = defence;
      rows.push_back(std::move(r));
    };
    for (const auto& a : cfg.attacks) {
      push(in_stage(ctx + " " + attacks::to_string(a.kind), [&] { return evaluate_attack(setup.net, setup, a).row; }),
           "none");
    }
    const auto train_images = setup.data.images_of(setup.data.split.train);
    const auto train_labels = setup.data.labels_of(setup.data.split.train);
    for (const auto& d : cfg.defences) {
      const std::string dname = defences::to_string(d.kind);
      const std::string dctx = ctx + " " + dname;
      switch (d.kind) {
        case defences::DefenceKind::AdvTrain: {
          const auto hardened = in_stage(dctx, [&] {
            return defences::adversarial_train(setup.net, train_images, train_labels,
                                               trial_train_config(cfg, setup.seed), d);
          });
          for (const auto& a : cfg.attacks) {
            push(in_stage(dctx, [&] { return evaluate_attack(hardened, setup, a).row; }),
                 dname + ":" + attacks::to_string(d.attack));
          }
          break;
        }
        case defences::DefenceKind::PixelDeflect: {
          const Transform deflect = [&](const Image& img) {
            return defences::pixel_deflect(img, defences::saliency_map(setup.net, img), d);
          };
          for (const auto& a : cfg.attacks) {
            push(in_stage(dctx, [&] { return evaluate_attack(setup.net, setup, a, deflect).row; }), dname);
          }
          break;
        }
        case defences::DefenceKind::Distill: {
          const Image& first = setup.data.images.front();
          const auto result = in_stage(dctx, [&] {
            return defences::distill(setup.net.specs(), {first.channels, first.height, first.width}, train_images,
                                     train_labels, trial_train_config(cfg, setup.seed), d);
          });
          for (const auto& a : cfg.attacks) {
            push(in_stage(dctx, [&] { return evaluate_attack(result.student, setup, a).row; }), dname);
          }
          break;
        }
      }
    }
  }
  auto means = mean_rows(rows);
  rows.insert(rows.end(), means.begin(), means.end());
  return rows;
}

std::vector<SweepPoint> sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.sweep) throw Error(ErrorCode::InvalidArgument, "config has no sweep section");
  const auto& sw = *cfg.sweep;
  std::vector<AttackEntry> targets;
  if (sw.attacks.empty()) {
    targets = cfg.attacks;
  } else {
    for (auto kind : sw.attacks) {
      auto it = std::find_if(cfg.attacks.begin(), cfg.attacks.end(), [&](const AttackEntry& a) { return a.kind == kind; });
      targets.push_back(it != cfg.attacks.end() ? *it : AttackEntry{kind, {}});
    }
  }
  if (targets.empty()) throw Error(ErrorCode::InvalidArgument, "sweep has no attacks");

  std::vector<SweepPoint> points;
  for (const auto& t : targets) {
    for (double v : sw.values) points.push_back({attacks::to_string(t.kind), sw.axis, v, 0.0, 0.0, 0.0});
  }
  const double inv = 1.0 / cfg.trials;
  for (int k = 0; k < cfg.trials; ++k) {
    const TrialSetup setup = prepare_trial(cfg, k);
    std::size_t p = 0;
    for (const auto& t : targets) {
      for (double v : sw.values) {
        AttackEntry e = t;
        set_axis(e.config, sw.axis, v);
        const auto row = in_stage("sweep " + points[p].attack + " at " + std::to_string(v),
                                  [&] { return evaluate_attack(setup.net, setup, e).row; });
        points[p].auc += row.adv_auc * inv;
        points[p].accuracy += row.adv_accuracy * inv;
        points[p].pert_mean += row.pert_mean * inv;
        ++p;
      }
    }
  }
  return points;
}

}  // namespace kryptolab::bench
