#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kryptolab/attacks.hpp"
#include "kryptolab/defences.hpp"
#include "kryptolab/image.hpp"
#include "kryptolab/network.hpp"

namespace kryptolab::bench {

namespace fs = std::filesystem;

// --------------------------------------------------------------------------
// Data

struct SynthSample {
  Image image;
  int label = 0;
  BinaryMask blob;  // exact lesion pixels
};

/// Textured background with one bright elliptical blob; label 1 iff a dark
/// core sits inside the blob. Labels alternate so classes balance. Pixel
/// values are multiples of 1/255. Requires n >= 4 and size >= 32.
std::vector<SynthSample> synth_samples(int n, int size, std::uint64_t seed, int channels = 1);

struct ManifestEntry {
  std::string image;  // relative to root
  int label = 0;
  std::string roi;    // optional ground-truth mask, relative to root
  bool operator==(const ManifestEntry&) const = default;
};

struct SplitFractions {
  double train = 0.7;
  double val = 0.05;
  double test = 0.25;
  bool operator==(const SplitFractions&) const = default;
};

struct DatasetManifest {
  fs::path root;
  std::uint64_t seed = 0;
  SplitFractions split;
  std::vector<ManifestEntry> entries;
};

/// Writes images, masks and manifest.json under `out_dir`.
DatasetManifest synth_dataset(int n, int size, std::uint64_t seed, const fs::path& out_dir, int channels = 1);

void write_manifest(const DatasetManifest& m, const fs::path& path);
/// Relative roots resolve against the manifest's directory.
DatasetManifest read_manifest(const fs::path& path);

struct Split {
  std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle cut into consecutive train/val/test runs.
Split split_indices(std::size_t n, const SplitFractions& f, std::uint64_t seed);

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<BinaryMask> rois;  // empty when the manifest has none
  Split split;

  std::vector<Image> images_of(const std::vector<std::size_t>& idx) const;
  std::vector<int> labels_of(const std::vector<std::size_t>& idx) const;
};

/// Throws MissingFile, BadFormat or BadLabel naming the entry.
Dataset load_dataset(const fs::path& manifest_path);
Dataset dataset_from_samples(const std::vector<SynthSample>& samples, const SplitFractions& f, std::uint64_t seed);

// --------------------------------------------------------------------------
// Configuration

struct AttackEntry {
  attacks::AttackKind kind = attacks::AttackKind::Fgsm;
  attacks::AttackConfig config;
};

enum class SweepAxis { Epsilon, DecayWeight, Overshoot };
std::string to_string(SweepAxis a);
SweepAxis parse_axis(std::string_view s);

struct SweepConfig {
  SweepAxis axis = SweepAxis::Epsilon;
  std::vector<double> values;
  std::vector<attacks::AttackKind> attacks;  // empty: every configured attack
};

struct DataConfig {
  int count = 2000;
  int size = 32;
  int channels = 1;
  SplitFractions split;
  std::string manifest;  // load from disk instead of synthesizing
};

struct NetworkConfig {
  std::string name = "small";  // small | reference | scaled
  int divisor = 10;            // for "scaled"
  std::vector<gradnet::LayerSpec> layers;  // overrides the preset when nonempty
  std::string model;           // load instead of training when set
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  int trials = 1;
  int test_limit = 0;  // 0: whole test split
  DataConfig data;
  NetworkConfig network;
  gradnet::TrainConfig train;
  std::vector<AttackEntry> attacks;
  std::vector<defences::DefenceConfig> defences;
  std::optional<SweepConfig> sweep;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const fs::path& path);
std::string dump_config(const ExperimentConfig& cfg);

/// conv8, pool, conv16, pool, dense 32, dense 1 + sigmoid.
std::vector<gradnet::LayerSpec> small_cnn_specs();
/// Presets: "small", "reference" (the full reference stack), "scaled" (reference
/// stack with widths divided by `divisor`).
std::vector<gradnet::LayerSpec> network_specs(const NetworkConfig& n);

// --------------------------------------------------------------------------
// Experiments

struct ReportRow {
  std::string attack;
  std::string defence = "none";
  std::string network;
  int trial = -1;  // -1: mean over trials
  double clean_accuracy = 0.0;
  double adv_accuracy = 0.0;
  double clean_auc = 0.0;
  double adv_auc = 0.0;
  double pert_mean = 0.0;   // L2 perturbation %
  double pert_worst = 0.0;
  double linf_max = 0.0;
  double seconds_per_sample = 0.0;
  int samples = 0;
  int failures = 0;  // samples where the attack hit a zero gradient

  bool operator==(const ReportRow&) const = default;
};

/// Trained network plus the data it was trained and evaluated on.
struct TrialSetup {
  gradnet::Network net;
  Dataset data;
  std::vector<std::size_t> test;  // test indices after test_limit
  std::uint64_t seed = 0;
};

std::uint64_t trial_seed(std::uint64_t seed, int trial);
TrialSetup prepare_trial(const ExperimentConfig& cfg, int trial);

/// Attack every test image of `setup` against `net`; `transform` (optional)
/// is applied to each adversarial image before classification.
struct AttackOutcome {
  ReportRow row;
  std::vector<attacks::AttackResult> results;
};
using Transform = std::function<Image(const Image&)>;
AttackOutcome evaluate_attack(const gradnet::Network& net, const TrialSetup& setup, const AttackEntry& attack,
                              const Transform& transform = {});

/// All attacks, then every defence against every attack, for each trial,
/// followed by per-(attack, defence) mean rows.
std::vector<ReportRow> run_experiment(const ExperimentConfig& cfg);

struct SweepPoint {
  std::string attack;
  SweepAxis axis = SweepAxis::Epsilon;
  double value = 0.0;
  double auc = 0.0;
  double accuracy = 0.0;
  double pert_mean = 0.0;
};

/// One point per (attack, grid value), averaged over trials. Networks are
/// trained once per trial and shared across the grid.
std::vector<SweepPoint> sweep(const ExperimentConfig& cfg);

// --------------------------------------------------------------------------
// Reports

enum class ReportFormat { Csv, Json };

/// Deviation notes written into every report header.
std::vector<std::string> report_notes(const ExperimentConfig* cfg = nullptr);

void emit_report(const std::vector<ReportRow>& rows, const fs::path& path, ReportFormat format,
                 const std::vector<std::string>& notes = report_notes());
std::vector<ReportRow> read_report_json(const fs::path& path);
void emit_sweep_csv(const std::vector<SweepPoint>& points, const fs::path& path,
                    const std::vector<std::string>& notes = report_notes());

/// Defence cell: "adv/clean" accuracy with two decimals.
std::string accuracy_pair(const ReportRow& row);

}  // namespace kryptolab::bench
