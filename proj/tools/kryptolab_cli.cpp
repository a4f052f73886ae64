// Command-line harness: synth, train, roi, attack, defend, sweep, report.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kryptolab/bench.hpp"
#include "kryptolab/error.hpp"
#include "kryptolab/imagekit.hpp"
#include "kryptolab/metrics.hpp"
#include "kryptolab/pnm.hpp"

namespace fs = std::filesystem;
using namespace kryptolab;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

bench::ExperimentConfig load(const Globals& g) {
  bench::ExperimentConfig cfg = g.config.empty() ? bench::ExperimentConfig{} : bench::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

void print_rows(const std::vector<bench::ReportRow>& rows) {
  std::printf("%-18s %-20s %5s %9s %9s %8s %8s %9s %11s\n", "attack", "defence", "trial", "clean_acc", "adv_acc",
              "adv_auc", "pert%", "linf", "sec/sample");
  for (const auto& r : rows) {
    std::printf("%-18s %-20s %5d %9.4f %9.4f %8.4f %8.3f %9.5f %11.6f\n", r.attack.c_str(), r.defence.c_str(), r.trial,
                r.clean_accuracy, r.adv_accuracy, r.adv_auc, r.pert_mean, r.linf_max, r.seconds_per_sample);
  }
}

void write_both(const std::vector<bench::ReportRow>& rows, const fs::path& stem, const bench::ExperimentConfig& cfg) {
  const auto notes = bench::report_notes(&cfg);
  bench::emit_report(rows, stem.string() + ".csv", bench::ReportFormat::Csv, notes);
  bench::emit_report(rows, stem.string() + ".json", bench::ReportFormat::Json, notes);
  std::cout << "wrote " << stem.string() << ".csv and .json\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kryptolab: adversarial attack and defence laboratory"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment configuration (JSON)");
  app.add_option("--seed", g.seed, "Override the configuration seed");
  app.add_option("--out", g.out, "Output directory");

  auto* synth = app.add_subcommand("synth", "Write a synthetic blob dataset with manifest.json");
  int count = 100, size = 32, channels = 1;
  synth->add_option("--count", count, "Number of images")->check(CLI::Range(4, 1000000));
  synth->add_option("--size", size, "Image side in pixels")->check(CLI::Range(32, 4096));
  synth->add_option("--channels", channels, "1 or 3")->check(CLI::IsMember({1, 3}));

  auto* train = app.add_subcommand("train", "Train the configured network and save it");

  auto* roi = app.add_subcommand("roi", "Extract the region of interest of an image");
  std::string image;
  int kernel = 5;
  bool invert = false;
  roi->add_option("--image", image, "PGM/PPM input")->required();
  roi->add_option("--kernel", kernel, "Odd dilation kernel size");
  roi->add_flag("--invert", invert, "Treat dark regions as foreground");

  auto* attack = app.add_subcommand("attack", "Run the configured attacks");
  auto* defend = app.add_subcommand("defend", "Run the configured attacks and defences");
  auto* sweep = app.add_subcommand("sweep", "Run the configured hyperparameter sweep");

  auto* report = app.add_subcommand("report", "Print a JSON report and optionally convert it to CSV");
  std::string input, csv;
  report->add_option("--input", input, "Report JSON")->required();
  report->add_option("--csv", csv, "CSV destination");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out = g.out;
    if (synth->parsed()) {
      const std::uint64_t seed = g.seed.value_or(load(g).seed);
      const auto m = bench::synth_dataset(count, size, seed, out, channels);
      std::cout << "wrote " << m.entries.size() << " images to " << out.string() << "\n";
    } else if (train->parsed()) {
      const auto cfg = load(g);
      auto setup = bench::prepare_trial(cfg, 0);
      fs::create_directories(out);
      gradnet::save(setup.net, out / "model.bin");
      std::vector<double> scores;
      std::vector<int> labels;
      for (auto i : setup.test) {
        scores.push_back(setup.net.score(setup.data.images[i]));
        labels.push_back(setup.data.labels[i]);
      }
      std::cout << "parameters " << setup.net.parameter_count() << ", test accuracy "
                << metrics::accuracy(scores, labels) << "\nwrote " << (out / "model.bin").string() << "\n";
    } else if (roi->parsed()) {
      const Image img = pnm::read_image(image);
      const auto mask = imagekit::roi_mask(img, imagekit::RoiOptions{256, kernel, invert});
      fs::create_directories(out);
      const auto dest = out / (fs::path(image).stem().string() + "_roi.pgm");
      pnm::write_mask(dest, mask.mask);
      std::cout << "area " << mask.area << "\nwrote " << dest.string() << "\n";
    } else if (attack->parsed() || defend->parsed()) {
      auto cfg = load(g);
      if (attack->parsed()) cfg.defences.clear();
      const auto rows = bench::run_experiment(cfg);
      print_rows(rows);
      write_both(rows, out / (attack->parsed() ? "attack" : "defend"), cfg);
    } else if (sweep->parsed()) {
      const auto cfg = load(g);
      const auto points = bench::sweep(cfg);
      for (const auto& p : points) std::printf("%-18s %-12s %8.4f auc %.4f acc %.4f\n", p.attack.c_str(),
                                               bench::to_string(p.axis).c_str(), p.value, p.auc, p.accuracy);
      const auto dest = out / ("sweep_" + bench::to_string(cfg.sweep->axis) + ".csv");
      bench::emit_sweep_csv(points, dest, bench::report_notes(&cfg));
      std::cout << "wrote " << dest.string() << "\n";
    } else if (report->parsed()) {
      const auto rows = bench::read_report_json(input);
      print_rows(rows);
      if (!csv.empty()) bench::emit_report(rows, csv, bench::ReportFormat::Csv);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
