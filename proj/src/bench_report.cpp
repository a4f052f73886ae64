#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "kryptolab/bench.hpp"
#include "kryptolab/error.hpp"

namespace kryptolab::bench {

namespace {

using json = nlohmann::json;

constexpr const char* kColumns[] = {"attack",    "defence",   "network",    "trial",     "clean_accuracy",
                                    "adv_accuracy", "accuracy_pair", "clean_auc", "adv_auc",  "pert_mean",
                                    "pert_worst", "linf_max", "seconds_per_sample", "samples", "failures"};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// JSON has no NaN; store it as null.
json jnum(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double from_jnum(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

}  // namespace

std::vector<std::string> report_notes(const ExperimentConfig* cfg) {
  std::vector<std::string> notes = {
      "grayscale: unweighted channel mean, quantized as floor(v*(L-1)+0.5) with L=256",
      "binarization: foreground iff intensity >= Otsu threshold; dilation kernel 5x5 unless configured",
      "perturbation %: 100*||adv-x||_2/||x||_2 with the clean image in the denominator",
      "accuracy: score >= 0.5 counts as class 1; auc: Mann-Whitney statistic with ties counted 1/2",
      "pixel deflection: saliency is normalized |dJ/dx| in place of class activation maps",
      "pixel deflection: 3x3 median filter in place of wavelet denoising",
      "kryptonite: RoI mask taken from the clean image once; progress floor 1e-8; returns the final iterate",
      "timing: wall clock around each attack call; kryptonite includes RoI extraction",
      "training: plain minibatch SGD on synthetic blob images",
  };
  if (cfg) {
    notes.push_back("config: name=" + cfg->name + " seed=" + std::to_string(cfg->seed) +
                    " trials=" + std::to_string(cfg->trials) + " epochs=" + std::to_string(cfg->train.epochs) +
                    " batch=" + std::to_string(cfg->train.batch_size) + " lr=" + num(cfg->train.learning_rate) +
                    " clip=" + num(cfg->train.clip_norm));
  }
  return notes;
}

std::string accuracy_pair(const ReportRow& row) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f/%.2f", row.adv_accuracy, row.clean_accuracy);
  return buf;
}

void emit_report(const std::vector<ReportRow>& rows, const fs::path& path, ReportFormat format,
                 const std::vector<std::string>& notes) {
  if (rows.empty()) throw Error(ErrorCode::EmptySet, "refusing to write an empty report to " + path.string());
  auto out = open_out(path);
  if (format == ReportFormat::Csv) {
    for (const auto& n : notes) out << "# " << n << '\n';
    for (std::size_t i = 0; i < std::size(kColumns); ++i) out << (i ? "," : "") << kColumns[i];
    out << '\n';
    for (const auto& r : rows) {
      out << r.attack << ',' << r.defence << ',' << r.network << ',' << r.trial << ',' << num(r.clean_accuracy) << ','
          << num(r.adv_accuracy) << ',' << accuracy_pair(r) << ',' << num(r.clean_auc) << ',' << num(r.adv_auc) << ','
          << num(r.pert_mean) << ',' << num(r.pert_worst) << ',' << num(r.linf_max) << ','
          << num(r.seconds_per_sample) << ',' << r.samples << ',' << r.failures << '\n';
    }
  } else {
    json j;
    j["notes"] = notes;
    j["rows"] = json::array();
    for (const auto& r : rows) {
      j["rows"].push_back({{"attack", r.attack},
                           {"defence", r.defence},
                           {"network", r.network},
                           {"trial", r.trial},
                           {"clean_accuracy", jnum(r.clean_accuracy)},
                           {"adv_accuracy", jnum(r.adv_accuracy)},
                           {"clean_auc", jnum(r.clean_auc)},
                           {"adv_auc", jnum(r.adv_auc)},
                           {"pert_mean", jnum(r.pert_mean)},
                           {"pert_worst", jnum(r.pert_worst)},
                           {"linf_max", jnum(r.linf_max)},
                           {"seconds_per_sample", jnum(r.seconds_per_sample)},
                           {"samples", r.samples},
                           {"failures", r.failures}});
    }
    out << j.dump(2) << '\n';
  }
  close_out(out, path);
}

std::vector<ReportRow> read_report_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    const json j = json::parse(in);
    std::vector<ReportRow> rows;
    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.attack = r.at("attack").get<std::string>();
      row.defence = r.at("defence").get<std::string>();
      row.network = r.at("network").get<std::string>();
      row.trial = r.at("trial").get<int>();
      row.clean_accuracy = from_jnum(r.at("clean_accuracy"));
      row.adv_accuracy = from_jnum(r.at("adv_accuracy"));
      row.clean_auc = from_jnum(r.at("clean_auc"));
      row.adv_auc = from_jnum(r.at("adv_auc"));
      row.pert_mean = from_jnum(r.at("pert_mean"));
      row.pert_worst = from_jnum(r.at("pert_worst"));
      row.linf_max = from_jnum(r.at("linf_max"));
      row.seconds_per_sample = from_jnum(r.at("seconds_per_sample"));
      row.samples = r.at("samples").get<int>();
      row.failures = r.at("failures").get<int>();
      rows.push_back(std::move(row));
    }
    return rows;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadFormat, path.string() + ": " + e.what());
  }
}

void emit_sweep_csv(const std::vector<SweepPoint>& points, const fs::path& path, const std::vector<std::string>& notes) {
  if (points.empty()) throw Error(ErrorCode::EmptySet, "refusing to write an empty sweep to " + path.string());
  auto out = open_out(path);
  for (const auto& n : notes) out << "# " << n << '\n';
  out << "attack,axis,value,auc,accuracy,pert_mean\n";
  for (const auto& p : points) {
    out << p.attack << ',' << to_string(p.axis) << ',' << num(p.value) << ',' << num(p.auc) << ',' << num(p.accuracy)
        << ',' << num(p.pert_mean) << '\n';
  }
  close_out(out, path);
}

}  // namespace kryptolab::bench
