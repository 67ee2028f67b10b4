// Copyright 2026 The Fedcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: evaluate, sweep, gen-data and calibrate.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 I/O or parse
// error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "fedcal/calibration.h"
#include "fedcal/harness.h"
#include "fedcal/hierarchy.h"
#include "fedcal/io.h"
#include "fedcal/random.h"
#include "fedcal/types.h"

namespace fedcal {
namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;

int Fail(int code, const absl::Status& status) {
  std::cerr << "fedcal: " << status.message() << "\n";
  return code;
}

// Privacy and histogram flags shared by evaluate and calibrate.
struct CommonFlags {
  std::string data;
  std::string regime = "secure_agg";
  std::optional<double> epsilon;
  int height = 10;
  int buckets = 10;
  int fanout = 2;
  uint64_t seed = 0;
  std::string split = "one_per_client";
  std::string simulation = "pooled";
  std::string boundary_budget = "shared";
  int ece_bins = 10;

  void Register(CLI::App* cmd) {
    cmd->set_help_flag("--help", "Print this help message and exit");
    cmd->add_option("--data", data, "score,label CSV file")->required();
    cmd->add_option("--regime", regime,
                    "secure_agg, dist_dp or local_dp")->capture_default_str();
    cmd->add_option("--epsilon", epsilon, "privacy budget (DP regimes)");
    cmd->add_option("--h", height, "hierarchy height")->capture_default_str();
    cmd->add_option("--B", buckets, "histogram buckets")->capture_default_str();
    cmd->add_option("--fanout", fanout, "hierarchy fanout")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "base random seed")->required();
    cmd->add_option("--split", split,
                    "one_per_client, skewed:<rho> or variable:<mean>")
        ->capture_default_str();
    cmd->add_option("--simulation", simulation, "pooled or per_client")
        ->capture_default_str();
    cmd->add_option("--boundary-budget", boundary_budget,
                    "shared or split (DP regimes)")
        ->capture_default_str();
    cmd->add_option("--ece-bins", ece_bins, "ECE evaluation bins")
        ->capture_default_str();
  }

  absl::Status Fill(EvaluationOptions& options, CellCoordinates& cell) const {
    absl::StatusOr<Regime> r = ParseRegime(regime);
    if (!r.ok()) return r.status();
    absl::StatusOr<SplitPolicy> p = ParseSplitPolicy(split);
    if (!p.ok()) return p.status();
    if (simulation != "pooled" && simulation != "per_client") {
      return absl::InvalidArgumentError(
          "--simulation must be 'pooled' or 'per_client'");
    }
    if (boundary_budget != "shared" && boundary_budget != "split") {
      return absl::InvalidArgumentError(
          "--boundary-budget must be 'shared' or 'split'");
    }
    options.boundary_budget = boundary_budget == "split"
                                  ? BoundaryBudget::kSplit
                                  : BoundaryBudget::kShared;
    options.split = *p;
    options.fanout = fanout;
    options.ece_bins = ece_bins;
    options.simulation = simulation == "pooled" ? NoiseSimulation::kPooled
                                                : NoiseSimulation::kPerClient;
    cell = {*r, epsilon, height, buckets};
    absl::StatusOr<PrivacySpec> spec =
        PrivacySpec::Create(*r, epsilon, height, fanout, options.simulation);
    if (!spec.ok()) return spec.status();
    if (LeafCount(fanout, height) < 0) {
      return absl::InvalidArgumentError("fanout^h is too large");
    }
    return absl::OkStatus();
  }
};

absl::StatusOr<std::vector<CalibrationMethod>> ParseMethods(
    const std::vector<std::string>& names) {
  std::vector<CalibrationMethod> out;
  for (const std::string& name : names) {
    if (name == "histogram") {
      out.push_back(CalibrationMethod::kHistogram);
    } else if (name == "bbq") {
      out.push_back(CalibrationMethod::kBbq);
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown calibration method '", name, "'"));
    }
  }
  return out;
}

int Run(int argc, char** argv) {
  CLI::App app{"Federated calibration and evaluation simulator"};
  app.require_subcommand(1);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "estimate metrics on one data file");
  CommonFlags eval_flags;
  eval_flags.Register(evaluate);
  std::vector<double> thresholds = {0.5};
  std::vector<std::string> metrics = {"auc", "pra"};
  std::vector<std::string> eval_methods = {"histogram"};
  bool strict_ties = false;
  bool eval_timing = false;
  evaluate->add_option("--thresholds", thresholds, "decision thresholds")
      ->delimiter(',');
  evaluate->add_option("--metrics", metrics, "auc, pra, ece")->delimiter(',');
  evaluate->add_option("--calibration", eval_methods, "histogram, bbq")
      ->delimiter(',');
  evaluate->add_flag("--strict-ties", strict_ties,
                     "compare AUC with ties counted as 0");
  evaluate->add_flag("--timing", eval_timing, "record wall time per row");

  CLI::App* sweep = app.add_subcommand("sweep", "run a configured sweep");
  sweep->set_help_flag("--help", "Print this help message and exit");
  std::string config_path;
  int threads = 1;
  bool sweep_timing = false;
  sweep->add_option("--config", config_path, "sweep configuration file")
      ->required();
  sweep->add_option("--threads", threads, "concurrent data groups")
      ->capture_default_str();
  sweep->add_flag("--timing", sweep_timing, "record wall time per row");

  CLI::App* gen = app.add_subcommand("gen-data", "write synthetic data");
  gen->set_help_flag("--help", "Print this help message and exit");
  int64_t count = 0;
  std::string spikes;
  double lipschitz = 0.0;
  double balance = 0.5;
  uint64_t gen_seed = 0;
  std::string out_path;
  gen->add_option("--M", count, "number of examples")->required();
  gen->add_option("--spikes", spikes,
                  "location:positive_mass:negative_mass,...");
  gen->add_option("--lipschitz", lipschitz, "slope bound of the density")
      ->capture_default_str();
  gen->add_option("--balance", balance, "positive fraction")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "random seed")->required();
  gen->add_option("--out", out_path, "output file (default: stdout)");

  CLI::App* calibrate =
      app.add_subcommand("calibrate", "fit a calibration map and report ECE");
  CommonFlags cal_flags;
  cal_flags.Register(calibrate);
  std::string cal_method = "histogram";
  calibrate->add_option("--method", cal_method, "histogram or bbq")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*evaluate) {
    EvaluationOptions options;
    CellCoordinates cell;
    if (absl::Status s = eval_flags.Fill(options, cell); !s.ok()) {
      return Fail(kExitUsage, s);
    }
    options.thresholds = thresholds;
    options.auc = options.pra = options.ece = false;
    for (const std::string& m : metrics) {
      if (m == "auc") {
        options.auc = true;
      } else if (m == "pra") {
        options.pra = true;
      } else if (m == "ece") {
        options.ece = true;
      } else {
        return Fail(kExitUsage, absl::InvalidArgumentError(
                                    absl::StrCat("unknown metric '", m, "'")));
      }
    }
    absl::StatusOr<std::vector<CalibrationMethod>> methods =
        ParseMethods(eval_methods);
    if (!methods.ok()) return Fail(kExitUsage, methods.status());
    options.calibration = *methods;
    options.strict_ties = strict_ties;
    options.timing = eval_timing;
    absl::StatusOr<std::vector<LabeledScore>> data =
        ReadDataCsv(eval_flags.data);
    if (!data.ok()) return Fail(kExitIo, data.status());
    absl::StatusOr<std::vector<SweepResultRow>> rows =
        EvaluateCell(*data, cell, options, eval_flags.seed);
    if (!rows.ok()) return Fail(kExitUsage, rows.status());
    std::cout << ResultHeaderLine() << "\n";
    for (const SweepResultRow& row : *rows) {
      std::cout << RowToJsonLine(row) << "\n";
    }
    return 0;
  }

  if (*sweep) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      return Fail(kExitIo, absl::NotFoundError(
                               absl::StrCat("cannot open ", config_path)));
    }
    std::stringstream text;
    text << in.rdbuf();
    absl::StatusOr<SweepConfig> config = ParseSweepConfig(text.str());
    if (!config.ok()) return Fail(kExitUsage, config.status());
    config->evaluation.timing = sweep_timing;
    std::vector<LabeledScore> loaded;
    if (config->data_path.has_value()) {
      absl::StatusOr<std::vector<LabeledScore>> data =
          ReadDataCsv(*config->data_path);
      if (!data.ok()) return Fail(kExitIo, data.status());
      loaded = *std::move(data);
    }
    bool header_written = false;
    auto write_header = [&] {
      if (header_written) return;
      std::cout << ResultHeaderLine() << "\n";
      header_written = true;
    };
    absl::Status status = RunSweep(
        *config, loaded,
        [&](const SweepResultRow& row) {
          write_header();
          std::cout << RowToJsonLine(row) << "\n" << std::flush;
        },
        threads);
    if (!status.ok()) return Fail(kExitUsage, status);
    write_header();
    return 0;
  }

  if (*gen) {
    WellBehavedSpec spec;
    spec.lipschitz = lipschitz;
    absl::StatusOr<std::vector<Spike>> parsed = ParseSpikes(spikes);
    if (!parsed.ok()) return Fail(kExitUsage, parsed.status());
    spec.spikes = *parsed;
    absl::StatusOr<std::vector<LabeledScore>> data =
        GenWellBehaved(count, spec, balance, gen_seed);
    if (!data.ok()) return Fail(kExitUsage, data.status());
    if (out_path.empty()) {
      WriteDataCsv(*data, std::cout);
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) {
        return Fail(kExitIo, absl::PermissionDeniedError(
                                 absl::StrCat("cannot write ", out_path)));
      }
      WriteDataCsv(*data, out);
    }
    return 0;
  }

  // calibrate
  EvaluationOptions options;
  CellCoordinates cell;
  if (absl::Status s = cal_flags.Fill(options, cell); !s.ok()) {
    return Fail(kExitUsage, s);
  }
  absl::StatusOr<std::vector<CalibrationMethod>> method =
      ParseMethods({cal_method});
  if (!method.ok()) return Fail(kExitUsage, method.status());
  absl::StatusOr<std::vector<LabeledScore>> data = ReadDataCsv(cal_flags.data);
  if (!data.ok()) return Fail(kExitIo, data.status());
  absl::StatusOr<CalibrationMap> map =
      FitCalibration(*data, cell, options, method->front(), cal_flags.seed);
  if (!map.ok()) return Fail(kExitUsage, map.status());
  std::vector<LabeledScore> calibrated;
  calibrated.reserve(data->size());
  for (const LabeledScore& ex : *data) {
    calibrated.push_back({ApplyCalibration(*map, ex.score), ex.label});
  }
  absl::StatusOr<EceReport> report = Ece(calibrated, options.ece_bins);
  if (!report.ok()) return Fail(kExitUsage, report.status());
  nlohmann::ordered_json out;
  out["calibration_map"] = CalibrationMapToJson(*map);
  out["ece_report"] = EceReportToJson(*report);
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace
}  // namespace fedcal

int main(int argc, char** argv) { return fedcal::Run(argc, argv); }
