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

#include "fedcal/io.h"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "absl/status/status.h"
#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace fedcal {
namespace {

using Json = nlohmann::ordered_json;

Json OptionalNumber(const std::optional<double>& x) {
  if (!x.has_value() || !std::isfinite(*x)) return nullptr;
  return *x;
}

std::vector<absl::string_view> SplitList(absl::string_view value) {
  std::vector<absl::string_view> out;
  for (absl::string_view item : absl::StrSplit(value, ',')) {
    item = absl::StripAsciiWhitespace(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

absl::Status KeyError(absl::string_view key, absl::string_view detail) {
  return absl::InvalidArgumentError(
      absl::StrCat("config key '", key, "': ", detail));
}

absl::StatusOr<double> ParseReal(absl::string_view key, absl::string_view v) {
  double x = 0.0;
  if (!absl::SimpleAtod(v, &x) || !std::isfinite(x)) {
    return KeyError(key, absl::StrCat("'", v, "' is not a number"));
  }
  return x;
}

// Integers may be written in scientific notation (1e5) as long as they are
// exact.
absl::StatusOr<int64_t> ParseInteger(absl::string_view key,
                                     absl::string_view v) {
  int64_t n = 0;
  if (absl::SimpleAtoi(v, &n)) return n;
  double x = 0.0;
  if (absl::SimpleAtod(v, &x) && std::isfinite(x) && x == std::floor(x) &&
      std::abs(x) < 9e15) {
    return static_cast<int64_t>(x);
  }
  return KeyError(key, absl::StrCat("'", v, "' is not an integer"));
}

template <typename T, typename Parse>
absl::StatusOr<std::vector<T>> ParseList(absl::string_view value, Parse parse) {
  std::vector<T> out;
  for (absl::string_view item : SplitList(value)) {
    auto parsed = parse(item);
    if (!parsed.ok()) return parsed.status();
    out.push_back(static_cast<T>(*parsed));
  }
  return out;
}

}  // namespace

absl::StatusOr<std::vector<LabeledScore>> ParseDataCsv(absl::string_view text) {
  std::vector<LabeledScore> out;
  int line_number = 0;
  bool header_seen = false;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_number;
    line = absl::StripSuffix(line, "\r");
    if (absl::StripAsciiWhitespace(line).empty()) continue;
    if (!header_seen) {
      if (absl::StripAsciiWhitespace(line) != "score,label") {
        return absl::InvalidArgumentError(absl::StrFormat(
            "line %d: expected header 'score,label', got '%s'", line_number,
            line));
      }
      header_seen = true;
      continue;
    }
    std::vector<absl::string_view> fields = absl::StrSplit(line, ',');
    if (fields.size() != 2) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "line %d: expected 2 fields, got %d", line_number, fields.size()));
    }
    const absl::string_view score_text = absl::StripAsciiWhitespace(fields[0]);
    const absl::string_view label_text = absl::StripAsciiWhitespace(fields[1]);
    double score = 0.0;
    if (!absl::SimpleAtod(score_text, &score) || !(score >= 0.0 && score <= 1.0)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "line %d: score '%s' is not a number in [0, 1]", line_number,
          score_text));
    }
    LabeledScore ex{score, Label::kNegative};
    if (label_text == "1") {
      ex.label = Label::kPositive;
    } else if (label_text != "0") {
      return absl::InvalidArgumentError(absl::StrFormat(
          "line %d: label '%s' must be 0 or 1", line_number, label_text));
    }
    out.push_back(ex);
  }
  if (!header_seen) {
    return absl::InvalidArgumentError("missing 'score,label' header");
  }
  return out;
}

absl::StatusOr<std::vector<LabeledScore>> ReadDataCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::stringstream buffer;
  buffer << in.rdbuf();
  absl::StatusOr<std::vector<LabeledScore>> data = ParseDataCsv(buffer.str());
  if (!data.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": ", data.status().message()));
  }
  return data;
}

void WriteDataCsv(absl::Span<const LabeledScore> examples, std::ostream& out) {
  out << "score,label\n";
  for (const LabeledScore& ex : examples) {
    out << absl::StrFormat("%.17g,%d\n", ex.score,
                           ex.label == Label::kPositive ? 1 : 0);
  }
}

std::string ResultHeaderLine() {
  Json header;
  header["schema"] = kResultSchema;
  return header.dump();
}

nlohmann::ordered_json RowToJson(const SweepResultRow& row) {
  Json j;
  j["metric"] = row.metric;
  j["regime"] = std::string(RegimeName(row.regime));
  j["M"] = row.num_examples;
  j["B"] = row.buckets;
  j["h"] = row.height;
  j["epsilon"] = OptionalNumber(row.epsilon);
  if (row.threshold.has_value()) j["threshold"] = *row.threshold;
  j["estimate"] = OptionalNumber(row.estimate);
  j["exact"] = OptionalNumber(row.exact);
  j["abs_error"] = OptionalNumber(row.abs_error);
  j["advertised_uncertainty"] = OptionalNumber(row.advertised_uncertainty);
  j["seed"] = row.seed;
  j["wall_ms"] = row.wall_ms;
  if (row.degenerate.has_value()) j["degenerate"] = *row.degenerate;
  return j;
}

std::string RowToJsonLine(const SweepResultRow& row) {
  return RowToJson(row).dump();
}

nlohmann::ordered_json CalibrationMapToJson(const CalibrationMap& map) {
  Json binnings = Json::array();
  for (size_t i = 0; i < map.binnings().size(); ++i) {
    Json b;
    b["weight"] = map.weights()[i];
    b["boundaries"] = map.binnings()[i].boundaries;
    b["values"] = map.binnings()[i].values;
    binnings.push_back(std::move(b));
  }
  Json j;
  j["binnings"] = std::move(binnings);
  return j;
}

nlohmann::ordered_json EceReportToJson(const EceReport& report) {
  Json bins = Json::array();
  for (const EceBin& bin : report.bins) {
    Json b;
    b["upper"] = bin.upper;
    b["count"] = bin.count;
    b["mass"] = bin.mass;
    b["observed"] = bin.observed;
    b["expected"] = bin.expected;
    bins.push_back(std::move(b));
  }
  Json j;
  j["K"] = report.num_bins;
  j["ece"] = report.ece;
  j["bins"] = std::move(bins);
  return j;
}

absl::StatusOr<std::vector<Spike>> ParseSpikes(absl::string_view text) {
  std::vector<Spike> spikes;
  for (absl::string_view item : SplitList(text)) {
    std::vector<absl::string_view> parts = absl::StrSplit(item, ':');
    double v[3];
    if (parts.size() != 3) {
      return absl::InvalidArgumentError(absl::StrCat(
          "spike '", item, "' must be location:positive_mass:negative_mass"));
    }
    for (int i = 0; i < 3; ++i) {
      if (!absl::SimpleAtod(absl::StripAsciiWhitespace(parts[i]), &v[i])) {
        return absl::InvalidArgumentError(
            absl::StrCat("spike '", item, "' has a non-numeric field"));
      }
    }
    spikes.push_back({v[0], v[1], v[2]});
  }
  return spikes;
}

absl::StatusOr<SweepConfig> ParseSweepConfig(absl::string_view text) {
  std::map<std::string, std::string> entries;
  int line_number = 0;
  for (absl::string_view line : absl::StrSplit(text, '\n')) {
    ++line_number;
    const size_t hash = line.find('#');
    if (hash != absl::string_view::npos) line = line.substr(0, hash);
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "config line %d: expected 'key = value'", line_number));
    }
    const std::string key(absl::StripAsciiWhitespace(line.substr(0, eq)));
    if (key.empty()) {
      return absl::InvalidArgumentError(
          absl::StrFormat("config line %d: empty key", line_number));
    }
    if (!entries.emplace(key, absl::StripAsciiWhitespace(line.substr(eq + 1)))
             .second) {
      return KeyError(key, "given more than once");
    }
  }
  if (!entries.count("seed")) return KeyError("seed", "is required");

  SweepConfig config;
  for (const auto& [key, value] : entries) {
    absl::Status status = absl::OkStatus();
    if (key == "data") {
      if (value.empty()) status = KeyError(key, "is empty");
      if (value != "synthetic") config.data_path = value;
    } else if (key == "M") {
      auto v = ParseList<int64_t>(
          value, [&](absl::string_view s) { return ParseInteger(key, s); });
      if (v.ok()) config.sizes = *v; else status = v.status();
    } else if (key == "B") {
      auto v = ParseList<int>(
          value, [&](absl::string_view s) { return ParseInteger(key, s); });
      if (v.ok()) config.buckets = *v; else status = v.status();
    } else if (key == "h") {
      auto v = ParseList<int>(
          value, [&](absl::string_view s) { return ParseInteger(key, s); });
      if (v.ok()) config.heights = *v; else status = v.status();
    } else if (key == "epsilon") {
      auto v = ParseList<double>(
          value, [&](absl::string_view s) { return ParseReal(key, s); });
      if (v.ok()) config.epsilons = *v; else status = v.status();
    } else if (key == "thresholds") {
      auto v = ParseList<double>(
          value, [&](absl::string_view s) { return ParseReal(key, s); });
      if (v.ok()) config.evaluation.thresholds = *v; else status = v.status();
    } else if (key == "regime") {
      auto v = ParseList<Regime>(value, [&](absl::string_view s) {
        absl::StatusOr<Regime> r = ParseRegime(s);
        return r.ok() ? r : absl::StatusOr<Regime>(KeyError(key, r.status().message()));
      });
      if (v.ok()) config.regimes = *v; else status = v.status();
    } else if (key == "repetitions" || key == "ece_bins" || key == "fanout") {
      absl::StatusOr<int64_t> n = ParseInteger(key, value);
      if (!n.ok()) {
        status = n.status();
      } else if (*n < 1 || *n > (int64_t{1} << 30)) {
        status = KeyError(key, "must be a positive integer");
      } else if (key == "repetitions") {
        config.repetitions = static_cast<int>(*n);
      } else if (key == "ece_bins") {
        config.evaluation.ece_bins = static_cast<int>(*n);
      } else {
        config.evaluation.fanout = static_cast<int>(*n);
      }
    } else if (key == "seed") {
      uint64_t seed = 0;
      if (absl::SimpleAtoi(value, &seed)) {
        config.seed = seed;
      } else {
        status = KeyError(key, "must be a nonnegative integer");
      }
    } else if (key == "split") {
      absl::StatusOr<SplitPolicy> p = ParseSplitPolicy(value);
      if (p.ok()) config.evaluation.split = *p;
      else status = KeyError(key, p.status().message());
    } else if (key == "lipschitz" || key == "balance") {
      absl::StatusOr<double> x = ParseReal(key, value);
      if (!x.ok()) {
        status = x.status();
      } else if (key == "lipschitz") {
        config.data_spec.lipschitz = *x;
      } else {
        config.balance = *x;
      }
    } else if (key == "spikes") {
      absl::StatusOr<std::vector<Spike>> s = ParseSpikes(value);
      if (s.ok()) config.data_spec.spikes = *s;
      else status = KeyError(key, s.status().message());
    } else if (key == "metrics") {
      config.evaluation.auc = config.evaluation.pra = config.evaluation.ece =
          false;
      for (absl::string_view m : SplitList(value)) {
        if (m == "auc") {
          config.evaluation.auc = true;
        } else if (m == "pra") {
          config.evaluation.pra = true;
        } else if (m == "ece") {
          config.evaluation.ece = true;
        } else {
          status = KeyError(key, absl::StrCat("unknown metric '", m, "'"));
        }
      }
    } else if (key == "calibration") {
      config.evaluation.calibration.clear();
      for (absl::string_view m : SplitList(value)) {
        if (m == "histogram") {
          config.evaluation.calibration.push_back(CalibrationMethod::kHistogram);
        } else if (m == "bbq") {
          config.evaluation.calibration.push_back(CalibrationMethod::kBbq);
        } else {
          status = KeyError(key, absl::StrCat("unknown method '", m, "'"));
        }
      }
    } else if (key == "simulation") {
      if (value == "pooled") {
        config.evaluation.simulation = NoiseSimulation::kPooled;
      } else if (value == "per_client") {
        config.evaluation.simulation = NoiseSimulation::kPerClient;
      } else {
        status = KeyError(key, "must be 'pooled' or 'per_client'");
      }
    } else if (key == "boundary_budget") {
      if (value == "shared" || value == "split") {
        config.evaluation.boundary_budget = value == "split"
                                                ? BoundaryBudget::kSplit
                                                : BoundaryBudget::kShared;
      } else {
        status = KeyError(key, "must be 'shared' or 'split'");
      }
    } else if (key == "ties") {
      if (value == "half" || value == "strict") {
        config.evaluation.strict_ties = value == "strict";
      } else {
        status = KeyError(key, "must be 'half' or 'strict'");
      }
    } else if (key == "width_cap") {
      if (value == "none") {
        config.evaluation.histogram.width_cap_slack = std::nullopt;
      } else {
        absl::StatusOr<int64_t> n = ParseInteger(key, value);
        if (n.ok() && std::abs(*n) <= 64) {
          config.evaluation.histogram.width_cap_slack = static_cast<int>(*n);
        } else {
          status = KeyError(key, "must be a small integer or 'none'");
        }
      }
    } else {
      status = KeyError(key, "unknown key");
    }
    if (!status.ok()) return status;
  }
  if (absl::Status s = ValidateSweepConfig(config); !s.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("invalid config: ", s.message()));
  }
  return config;
}

}  // namespace fedcal
