#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kryptolab/bench.hpp"
#include "kryptolab/error.hpp"

namespace kryptolab::bench {

namespace {

using json = nlohmann::json;
using gradnet::LayerKind;
using gradnet::LayerSpec;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::BadFormat, "config " + where + ": " + what);
}

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) bad(where, "unknown key '" + k + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(where, std::string("bad value for '") + key + "'");
  }
}

attacks::AttackConfig parse_attack_config(const json& j, const std::string& where) {
  attacks::AttackConfig c;
  read(j, "epsilon", c.epsilon, where);
  read(j, "iterations", c.iterations, where);
  if (j.contains("alpha") && !j.at("alpha").is_null()) {
    double a = 0.0;
    read(j, "alpha", a, where);
    c.alpha = a;
  }
  read(j, "decay_weight", c.decay_weight, where);
  read(j, "initial_decay", c.initial_decay, where);
  read(j, "overshoot", c.overshoot, where);
  read(j, "kernel_size", c.kernel_size, where);
  read(j, "seed", c.seed, where);
  read(j, "reextract_roi", c.reextract_roi, where);
  return c;
}

json dump_attack_config(const attacks::AttackConfig& c) {
  json j = {{"epsilon", c.epsilon},       {"iterations", c.iterations},       {"decay_weight", c.decay_weight},
            {"initial_decay", c.initial_decay}, {"overshoot", c.overshoot}, {"kernel_size", c.kernel_size},
            {"seed", c.seed},             {"reextract_roi", c.reextract_roi}};
  j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
  return j;
}

AttackEntry parse_attack_entry(const json& j, const std::string& where) {
  check_keys(j, where, {"kind", "epsilon", "iterations", "alpha", "decay_weight", "initial_decay", "overshoot",
                        "kernel_size", "seed", "reextract_roi"});
  if (!j.contains("kind")) bad(where, "missing 'kind'");
  AttackEntry e;
  e.kind = attacks::parse_attack(j.at("kind").get<std::string>());
  e.config = parse_attack_config(j, where);
  return e;
}

json dump_attack_entry(const AttackEntry& e) {
  json j = dump_attack_config(e.config);
  j["kind"] = attacks::to_string(e.kind);
  return j;
}

LayerSpec parse_layer(const json& j, const std::string& where) {
  check_keys(j, where, {"kind", "out_channels", "kernel", "padding", "stride", "window", "rate", "width", "temperature"});
  const std::string kind = j.value("kind", std::string());
  LayerSpec s;
  if (kind == "conv") {
    std::string pad = "same";
    read(j, "padding", pad, where);
    if (pad != "same" && pad != "valid") bad(where, "padding must be 'same' or 'valid'");
    s = LayerSpec::conv(j.value("out_channels", 1), j.value("kernel", 3), j.value("stride", 1),
                        pad == "same" ? gradnet::Padding::Same : gradnet::Padding::Valid);
  } else if (kind == "relu") {
    s = LayerSpec::relu();
  } else if (kind == "maxpool") {
    s = LayerSpec::maxpool(j.value("window", 2), j.value("stride", 2));
  } else if (kind == "dropout") {
    s = LayerSpec::dropout(j.value("rate", 0.0));
  } else if (kind == "flatten") {
    s = LayerSpec::flatten();
  } else if (kind == "dense") {
    s = LayerSpec::dense(j.value("width", 1));
  } else if (kind == "sigmoid") {
    s = LayerSpec::sigmoid();
  } else if (kind == "softmax") {
    s = LayerSpec::softmax(j.value("temperature", 1.0));
  } else {
    bad(where, "unknown layer kind '" + kind + "'");
  }
  return s;
}

json dump_layer(const LayerSpec& s) {
  json j = {{"kind", gradnet::to_string(s.kind)}};
  switch (s.kind) {
    case LayerKind::Conv:
      j["out_channels"] = s.out_channels;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding == gradnet::Padding::Same ? "same" : "valid";
      break;
    case LayerKind::MaxPool:
      j["window"] = s.window;
      j["stride"] = s.stride;
      break;
    case LayerKind::Dropout: j["rate"] = s.rate; break;
    case LayerKind::Dense: j["width"] = s.width; break;
    case LayerKind::Softmax: j["temperature"] = s.temperature; break;
    default: break;
  }
  return j;
}

defences::DefenceConfig parse_defence(const json& j, const std::string& where) {
  check_keys(j, where, {"kind", "fraction", "deflections", "window", "denoise", "temperature", "seed", "schedule",
                        "warm_start", "attack"});
  if (!j.contains("kind")) bad(where, "missing 'kind'");
  defences::DefenceConfig d;
  d.kind = defences::parse_defence(j.at("kind").get<std::string>());
  read(j, "fraction", d.adversarial_fraction, where);
  read(j, "deflections", d.deflections, where);
  read(j, "window", d.window, where);
  read(j, "denoise", d.denoise, where);
  read(j, "temperature", d.temperature, where);
  read(j, "seed", d.seed, where);
  read(j, "warm_start", d.warm_start, where);
  if (j.contains("schedule")) {
    const auto s = j.at("schedule").get<std::string>();
    if (s == "per_epoch") {
      d.schedule = defences::RegenSchedule::PerEpoch;
    } else if (s == "once") {
      d.schedule = defences::RegenSchedule::Once;
    } else {
      bad(where, "schedule must be 'per_epoch' or 'once'");
    }
  }
  if (j.contains("attack")) {
    const auto e = parse_attack_entry(j.at("attack"), where + ".attack");
    d.attack = e.kind;
    d.attack_config = e.config;
  }
  return d;
}

json dump_defence(const defences::DefenceConfig& d) {
  return {{"kind", defences::to_string(d.kind)},
          {"fraction", d.adversarial_fraction},
          {"deflections", d.deflections},
          {"window", d.window},
          {"denoise", d.denoise},
          {"temperature", d.temperature},
          {"seed", d.seed},
          {"schedule", d.schedule == defences::RegenSchedule::Once ? "once" : "per_epoch"},
          {"warm_start", d.warm_start},
          {"attack", dump_attack_entry({d.attack, d.attack_config})}};
}

}  // namespace

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Epsilon: return "epsilon";
    case SweepAxis::DecayWeight: return "decay_weight";
    case SweepAxis::Overshoot: return "overshoot";
  }
  return "unknown";
}

SweepAxis parse_axis(std::string_view s) {
  if (s == "epsilon") return SweepAxis::Epsilon;
  if (s == "decay_weight") return SweepAxis::DecayWeight;
  if (s == "overshoot") return SweepAxis::Overshoot;
  throw Error(ErrorCode::InvalidArgument, "unknown sweep axis '" + std::string(s) + "'");
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  if (test_limit < 0) throw Error(ErrorCode::InvalidArgument, "test_limit must be non-negative");
  if (!(train.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (!(train.clip_norm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "clip_norm must be non-negative");
  for (const auto& a : attacks) a.config.validate();
  for (const auto& d : defences) d.validate();
  if (sweep && sweep->values.empty()) throw Error(ErrorCode::InvalidArgument, "sweep grid is empty");
}

std::vector<LayerSpec> small_cnn_specs() {
  return {LayerSpec::conv(8, 3),  LayerSpec::relu(),    LayerSpec::maxpool(2, 2), LayerSpec::conv(16, 3),
          LayerSpec::relu(),      LayerSpec::maxpool(2, 2), LayerSpec::flatten(),   LayerSpec::dense(32),
          LayerSpec::relu(),      LayerSpec::dense(1),  LayerSpec::sigmoid()};
}

std::vector<LayerSpec> network_specs(const NetworkConfig& n) {
  if (!n.layers.empty()) return n.layers;
  if (n.name == "small") return small_cnn_specs();
  if (n.name == "reference") return gradnet::reference_cnn_specs();
  if (n.name == "scaled") return gradnet::scaled_cnn_specs(n.divisor);
  throw Error(ErrorCode::InvalidArgument, "unknown network preset '" + n.name + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadFormat, std::string("config: ") + e.what());
  }
  check_keys(j, "root", {"name", "seed", "trials", "test_limit", "data", "network", "train", "attacks", "defences",
                         "sweep"});
  ExperimentConfig c;
  read(j, "name", c.name, "root");
  read(j, "seed", c.seed, "root");
  read(j, "trials", c.trials, "root");
  read(j, "test_limit", c.test_limit, "root");

  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"count", "size", "channels", "split", "manifest"});
    read(d, "count", c.data.count, "data");
    read(d, "size", c.data.size, "data");
    read(d, "channels", c.data.channels, "data");
    read(d, "manifest", c.data.manifest, "data");
    if (d.contains("split")) {
      const auto& s = d.at("split");
      check_keys(s, "data.split", {"train", "val", "test"});
      read(s, "train", c.data.split.train, "data.split");
      read(s, "val", c.data.split.val, "data.split");
      read(s, "test", c.data.split.test, "data.split");
    }
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    check_keys(n, "network", {"name", "divisor", "layers", "model"});
    read(n, "name", c.network.name, "network");
    read(n, "divisor", c.network.divisor, "network");
    read(n, "model", c.network.model, "network");
    if (n.contains("layers")) {
      int i = 0;
      for (const auto& l : n.at("layers")) c.network.layers.push_back(parse_layer(l, "network.layers[" + std::to_string(i++) + "]"));
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train", {"epochs", "batch_size", "learning_rate", "clip_norm", "seed"});
    read(t, "epochs", c.train.epochs, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "clip_norm", c.train.clip_norm, "train");
    read(t, "seed", c.train.seed, "train");
  }
  if (j.contains("attacks")) {
    int i = 0;
    for (const auto& a : j.at("attacks")) c.attacks.push_back(parse_attack_entry(a, "attacks[" + std::to_string(i++) + "]"));
  }
  if (j.contains("defences")) {
    int i = 0;
    for (const auto& d : j.at("defences")) c.defences.push_back(parse_defence(d, "defences[" + std::to_string(i++) + "]"));
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, "sweep", {"axis", "values", "attacks"});
    SweepConfig sw;
    sw.axis = parse_axis(s.value("axis", std::string("epsilon")));
    read(s, "values", sw.values, "sweep");
    if (s.contains("attacks")) {
      for (const auto& a : s.at("attacks")) sw.attacks.push_back(attacks::parse_attack(a.get<std::string>()));
    }
    c.sweep = std::move(sw);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string dump_config(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["test_limit"] = c.test_limit;
  j["data"] = {{"count", c.data.count},
               {"size", c.data.size},
               {"channels", c.data.channels},
               {"manifest", c.data.manifest},
               {"split", {{"train", c.data.split.train}, {"val", c.data.split.val}, {"test", c.data.split.test}}}};
  j["network"] = {{"name", c.network.name}, {"divisor", c.network.divisor}, {"model", c.network.model}};
  if (!c.network.layers.empty()) {
    j["network"]["layers"] = json::array();
    for (const auto& l : c.network.layers) j["network"]["layers"].push_back(dump_layer(l));
  }
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"clip_norm", c.train.clip_norm},
                {"seed", c.train.seed}};
  j["attacks"] = json::array();
  for (const auto& a : c.attacks) j["attacks"].push_back(dump_attack_entry(a));
  j["defences"] = json::array();
  for (const auto& d : c.defences) j["defences"].push_back(dump_defence(d));
  if (c.sweep) {
    json names = json::array();
    for (auto k : c.sweep->attacks) names.push_back(attacks::to_string(k));
    j["sweep"] = {{"axis", to_string(c.sweep->axis)}, {"values", c.sweep->values}, {"attacks", names}};
  }
  return j.dump(2);
}

}  // namespace kryptolab::bench
