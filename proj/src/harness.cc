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

#include "fedcal/harness.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fedcal/calibration.h"
#include "fedcal/metrics.h"
#include "fedcal/oracle.h"
#include "fedcal/random.h"

namespace fedcal {
namespace {

// Inverse CDF of the smooth positive-class density at u in [0, 1).
double SmoothPositive(double lipschitz, double u) {
  if (lipschitz <= 0.0) return u;
  if (lipschitz <= 2.0) {
    const double b = 1.0 - lipschitz / 2.0;
    return (-b + std::sqrt(b * b + 2.0 * lipschitz * u)) / lipschitz;
  }
  const double start = 1.0 - std::sqrt(2.0 / lipschitz);
  return start + std::sqrt(2.0 * u / lipschitz);
}

uint64_t DoubleBits(double x) {
  uint64_t bits = 0;
  std::memcpy(&bits, &x, sizeof(bits));
  return bits;
}

SweepResultRow RowTemplate(const CellCoordinates& cell, int64_t m,
                           uint64_t seed) {
  SweepResultRow row;
  row.regime = cell.regime;
  row.num_examples = m;
  row.buckets = cell.buckets;
  row.height = cell.height;
  if (cell.regime != Regime::kSecureAgg) row.epsilon = cell.epsilon;
  row.seed = seed;
  return row;
}

void SetEstimate(SweepResultRow& row, double estimate,
                 std::optional<double> exact) {
  row.estimate = estimate;
  row.exact = exact;
  if (exact.has_value()) row.abs_error = std::abs(estimate - *exact);
}

std::string MetricName(CalibrationMethod method) {
  return method == CalibrationMethod::kBbq ? "ece_bbq" : "ece";
}

// Privacy spec of a cell, checked against the supported tree sizes.
absl::StatusOr<PrivacySpec> CellSpec(const CellCoordinates& cell,
                                     const EvaluationOptions& options) {
  absl::StatusOr<PrivacySpec> spec =
      PrivacySpec::Create(cell.regime, cell.epsilon, cell.height,
                          options.fanout, options.simulation);
  if (!spec.ok()) return spec.status();
  if (LeafCount(spec->fanout(), spec->height()) < 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "fanout^height = %d^%d is too large", spec->fanout(), spec->height()));
  }
  if (cell.buckets < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("bucket count must be >= 1, got %d", cell.buckets));
  }
  return spec;
}

// Class hierarchies used for counting, plus the hierarchy that quantile
// boundaries are read from. Under a split budget the two come from separate
// releases at half the epsilon each.
struct CellHierarchies {
  ClassHierarchies counts;
  HierarchicalCounts boundary_source;
};

absl::StatusOr<CellHierarchies> BuildCellHierarchies(
    absl::Span<const ClientShard> shards, const PrivacySpec& spec,
    const EvaluationOptions& options, uint64_t seed, uint64_t stream) {
  const bool split = options.boundary_budget == BoundaryBudget::kSplit &&
                     spec.regime() != Regime::kSecureAgg;
  absl::StatusOr<PrivacySpec> half =
      split ? PrivacySpec::Create(spec.regime(), spec.epsilon() / 2.0,
                                  spec.height(), spec.fanout(),
                                  spec.simulation())
            : absl::StatusOr<PrivacySpec>(spec);
  if (!half.ok()) return half.status();
  absl::StatusOr<ClassHierarchies> counts =
      BuildClassHierarchies(shards, *half, DeriveSeed(seed, {kTagCell, stream}));
  if (!counts.ok()) return counts.status();
  absl::StatusOr<HierarchicalCounts> source = absl::UnknownError("unset");
  if (split) {
    absl::StatusOr<ClassHierarchies> release = BuildClassHierarchies(
        shards, *half, DeriveSeed(seed, {kTagBoundaries, stream}));
    if (!release.ok()) return release.status();
    source = HierarchicalCounts::Sum(release->positive, release->negative);
  } else {
    source = HierarchicalCounts::Sum(counts->positive, counts->negative);
  }
  if (!source.ok()) return source.status();
  return CellHierarchies{*std::move(counts), *std::move(source)};
}

absl::StatusOr<ScoreHistogram> CellHistogram(const CellHierarchies& hier,
                                             int buckets,
                                             const HistogramOptions& options) {
  absl::StatusOr<std::vector<int64_t>> bounds =
      QuantileLeafBoundaries(hier.boundary_source, buckets, options);
  if (!bounds.ok()) return bounds.status();
  return HistogramFromLeafBoundaries(hier.counts.positive,
                                     hier.counts.negative, *bounds);
}

absl::StatusOr<CellHierarchies> ReleaseForCalibration(
    absl::Span<const LabeledScore> examples, const PrivacySpec& spec,
    const EvaluationOptions& options, uint64_t seed) {
  absl::StatusOr<std::vector<ClientShard>> shards = SplitToClients(
      examples, options.split, DeriveSeed(seed, {kTagSplit, 1}));
  if (!shards.ok()) return shards.status();
  return BuildCellHierarchies(*shards, spec, options, seed, 1);
}

absl::StatusOr<CalibrationMap> FitFromHierarchies(
    const CellHierarchies& hier, const CellCoordinates& cell,
    const EvaluationOptions& options, CalibrationMethod method) {
  if (method == CalibrationMethod::kBbq) {
    const ClassHierarchies& counts = hier.counts;
    const double population = counts.positive.population_total().value +
                              counts.negative.population_total().value;
    BbqOptions bbq;
    bbq.histogram = options.histogram;
    bbq.boundary_source = &hier.boundary_source;
    return BbqCalibrate(counts.positive, counts.negative, population, bbq);
  }
  absl::StatusOr<ScoreHistogram> hist =
      CellHistogram(hier, cell.buckets, options.histogram);
  if (!hist.ok()) return hist.status();
  return CalibrateHistogram(*hist);
}

// Rows for the AUC and thresholded metrics on the full data.
void EvaluateRanking(absl::Span<const LabeledScore> examples,
                     const PrivacySpec& spec, const CellCoordinates& cell,
                     const EvaluationOptions& options, uint64_t seed,
                     const SweepResultRow& base,
                     std::vector<SweepResultRow>& rows) {
  const size_t first = rows.size();
  if (options.auc) {
    rows.push_back(base);
    rows.back().metric = "auc";
  }
  if (options.pra) {
    for (double t : options.thresholds) {
      for (const char* name : {"precision", "recall", "accuracy"}) {
        rows.push_back(base);
        rows.back().metric = name;
        rows.back().threshold = t;
      }
    }
  }
  if (rows.size() == first) return;
  auto fail_all = [&](const absl::Status& status) {
    for (size_t i = first; i < rows.size(); ++i) {
      rows[i].degenerate = std::string(status.message());
    }
  };

  absl::StatusOr<std::vector<ClientShard>> shards =
      SplitToClients(examples, options.split, DeriveSeed(seed, {kTagSplit}));
  if (!shards.ok()) return fail_all(shards.status());
  absl::StatusOr<CellHierarchies> hier =
      BuildCellHierarchies(*shards, spec, options, seed, 0);
  if (!hier.ok()) return fail_all(hier.status());
  absl::StatusOr<ScoreHistogram> hist =
      CellHistogram(*hier, cell.buckets, options.histogram);
  if (!hist.ok()) return fail_all(hist.status());

  size_t next = first;
  if (options.auc) {
    SweepResultRow& row = rows[next++];
    absl::StatusOr<AucEstimate> est = AucHistogram(*hist);
    absl::StatusOr<ExactAucResult> exact = ExactAuc(examples);
    std::optional<double> truth;
    if (exact.ok()) {
      truth = options.strict_ties ? exact->strict : exact->half_ties;
    }
    if (est.ok()) {
      SetEstimate(row, est->value, truth);
      row.advertised_uncertainty =
          est->bucketization_halfwidth + std::sqrt(est->noise_variance);
    } else {
      row.degenerate = std::string(est.status().message());
      row.exact = truth;
    }
  }
  if (!options.pra) return;
  for (double t : options.thresholds) {
    absl::StatusOr<PraEstimate> est = PraThreshold(*hist, t);
    absl::StatusOr<ExactPraResult> exact = ExactPra(examples, t);
    const std::optional<double> estimates[3] = {
        est.ok() ? est->precision : std::nullopt,
        est.ok() ? est->recall : std::nullopt,
        est.ok() ? est->accuracy : std::nullopt};
    const std::optional<double> truths[3] = {
        exact.ok() ? exact->precision : std::nullopt,
        exact.ok() ? exact->recall : std::nullopt,
        exact.ok() ? exact->accuracy : std::nullopt};
    for (int k = 0; k < 3; ++k) {
      SweepResultRow& row = rows[next++];
      if (!est.ok()) {
        row.degenerate = std::string(est.status().message());
        row.exact = truths[k];
      } else if (!estimates[k].has_value()) {
        row.degenerate = absl::StrCat(row.metric,
                                      ": noisy denominator is not positive");
        row.exact = truths[k];
      } else {
        SetEstimate(row, *estimates[k], truths[k]);
        row.advertised_uncertainty = est->threshold_slack;
      }
    }
  }
}

// Rows for calibration quality: calibrate on the even-indexed examples and
// measure ECE on the odd-indexed ones.
void EvaluateCalibration(absl::Span<const LabeledScore> examples,
                         const PrivacySpec& spec, const CellCoordinates& cell,
                         const EvaluationOptions& options, uint64_t seed,
                         const SweepResultRow& base,
                         std::vector<SweepResultRow>& rows) {
  const size_t first = rows.size();
  for (CalibrationMethod method : options.calibration) {
    rows.push_back(base);
    rows.back().metric = MetricName(method);
    rows.back().exact = 0.0;
  }
  auto fail_all = [&](const absl::Status& status) {
    for (size_t i = first; i < rows.size(); ++i) {
      rows[i].degenerate = std::string(status.message());
    }
  };
  std::vector<LabeledScore> train;
  std::vector<LabeledScore> test;
  for (size_t i = 0; i < examples.size(); ++i) {
    (i % 2 == 0 ? train : test).push_back(examples[i]);
  }
  if (test.empty()) {
    return fail_all(absl::FailedPreconditionError(
        "calibration needs at least two examples"));
  }
  absl::StatusOr<CellHierarchies> hier =
      ReleaseForCalibration(train, spec, options, seed);
  if (!hier.ok()) return fail_all(hier.status());

  for (size_t i = 0; i < options.calibration.size(); ++i) {
    SweepResultRow& row = rows[first + i];
    absl::StatusOr<CalibrationMap> map =
        FitFromHierarchies(*hier, cell, options, options.calibration[i]);
    if (!map.ok()) {
      row.degenerate = std::string(map.status().message());
      continue;
    }
    std::vector<LabeledScore> calibrated;
    calibrated.reserve(test.size());
    for (const LabeledScore& ex : test) {
      calibrated.push_back({ApplyCalibration(*map, ex.score), ex.label});
    }
    absl::StatusOr<EceReport> report = Ece(calibrated, options.ece_bins);
    if (!report.ok()) {
      row.degenerate = std::string(report.status().message());
      continue;
    }
    SetEstimate(row, report->ece, 0.0);
  }
}

}  // namespace

absl::StatusOr<std::vector<LabeledScore>> GenWellBehaved(
    int64_t count, const WellBehavedSpec& spec, double balance, uint64_t seed) {
  if (count < 0) {
    return absl::InvalidArgumentError("example count must be >= 0");
  }
  if (!(balance > 0.0 && balance < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("class balance must lie in (0, 1), got %g", balance));
  }
  if (absl::Status s = ValidateWellBehavedSpec(spec); !s.ok()) return s;
  Rng rng = MakeRng(seed, {kTagDataGen});
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<LabeledScore> out;
  out.reserve(count);
  for (int64_t i = 0; i < count; ++i) {
    const bool positive = uniform(rng) < balance;
    double u = uniform(rng);
    double score = -1.0;
    for (const Spike& spike : spec.spikes) {
      const double mass = positive ? spike.positive_mass : spike.negative_mass;
      if (u < mass) {
        score = spike.location;
        break;
      }
      u -= mass;
    }
    if (score < 0.0) {
      const double v = uniform(rng);
      const double s = SmoothPositive(spec.lipschitz, v);
      score = std::clamp(positive ? s : 1.0 - s, 0.0, 1.0);
    }
    out.push_back({score, positive ? Label::kPositive : Label::kNegative});
  }
  return out;
}

absl::StatusOr<SplitPolicy> ParseSplitPolicy(absl::string_view text) {
  SplitPolicy policy;
  if (text == "one_per_client") return policy;
  const size_t colon = text.find(':');
  if (colon == absl::string_view::npos) {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown split policy '", text, "'"));
  }
  const absl::string_view kind = text.substr(0, colon);
  double parameter = 0.0;
  if (!absl::SimpleAtod(text.substr(colon + 1), &parameter)) {
    return absl::InvalidArgumentError(
        absl::StrCat("bad split parameter in '", text, "'"));
  }
  if (kind == "skewed") {
    if (!(parameter > 0.0 && parameter <= 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("skew fraction must lie in (0, 1], got %g", parameter));
    }
    policy.kind = SplitPolicy::Kind::kSkewedByClass;
  } else if (kind == "variable") {
    if (!(parameter > 0.0) || !std::isfinite(parameter)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("mean shard size must be > 0, got %g", parameter));
    }
    policy.kind = SplitPolicy::Kind::kVariableSize;
  } else {
    return absl::InvalidArgumentError(
        absl::StrCat("unknown split policy '", text, "'"));
  }
  policy.parameter = parameter;
  return policy;
}

std::string SplitPolicyName(const SplitPolicy& policy) {
  switch (policy.kind) {
    case SplitPolicy::Kind::kOnePerClient:
      return "one_per_client";
    case SplitPolicy::Kind::kSkewedByClass:
      return absl::StrCat("skewed:", policy.parameter);
    case SplitPolicy::Kind::kVariableSize:
      return absl::StrCat("variable:", policy.parameter);
  }
  return "";
}

absl::StatusOr<std::vector<ClientShard>> SplitToClients(
    absl::Span<const LabeledScore> examples, const SplitPolicy& policy,
    uint64_t seed) {
  const int64_t m = static_cast<int64_t>(examples.size());
  std::vector<ClientShard> shards;
  switch (policy.kind) {
    case SplitPolicy::Kind::kOnePerClient:
      shards.resize(m);
      for (int64_t i = 0; i < m; ++i) shards[i].examples.push_back(examples[i]);
      return shards;
    case SplitPolicy::Kind::kSkewedByClass: {
      const double rho = policy.parameter;
      if (!(rho > 0.0 && rho <= 1.0)) {
        return absl::InvalidArgumentError(
            absl::StrFormat("skew fraction must lie in (0, 1], got %g", rho));
      }
      if (m == 0) return shards;
      std::vector<LabeledScore> pos;
      std::vector<LabeledScore> rest;
      for (const LabeledScore& ex : examples) {
        (ex.label == Label::kPositive ? pos : rest).push_back(ex);
      }
      Rng rng = MakeRng(seed, {kTagSplit});
      std::shuffle(pos.begin(), pos.end(), rng);
      const int64_t head =
          std::min<int64_t>(m, static_cast<int64_t>(std::ceil(rho * m)));
      const size_t skewed = std::min<size_t>(
          pos.size(), static_cast<size_t>(std::ceil(rho * pos.size())));
      shards.resize(m);
      for (size_t i = 0; i < skewed; ++i) {
        shards[i % head].examples.push_back(pos[i]);
      }
      rest.insert(rest.end(), pos.begin() + skewed, pos.end());
      std::shuffle(rest.begin(), rest.end(), rng);
      const int64_t tail_start = head < m ? head : 0;
      const int64_t tail = m - tail_start;
      for (size_t i = 0; i < rest.size(); ++i) {
        shards[tail_start + static_cast<int64_t>(i) % tail].examples.push_back(
            rest[i]);
      }
      return shards;
    }
    case SplitPolicy::Kind::kVariableSize: {
      if (!(policy.parameter > 0.0) || !std::isfinite(policy.parameter)) {
        return absl::InvalidArgumentError("mean shard size must be > 0");
      }
      std::vector<LabeledScore> shuffled(examples.begin(), examples.end());
      Rng rng = MakeRng(seed, {kTagSplit});
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::poisson_distribution<int64_t> size(policy.parameter);
      for (size_t next = 0; next < shuffled.size();) {
        const size_t take = std::min<size_t>(size(rng), shuffled.size() - next);
        ClientShard shard;
        shard.examples.assign(shuffled.begin() + next,
                              shuffled.begin() + next + take);
        shards.push_back(std::move(shard));
        next += take;
      }
      return shards;
    }
  }
  return absl::InternalError("unknown split policy");
}

absl::StatusOr<std::vector<SweepResultRow>> EvaluateCell(
    absl::Span<const LabeledScore> examples, const CellCoordinates& cell,
    const EvaluationOptions& options, uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  absl::StatusOr<PrivacySpec> spec = CellSpec(cell, options);
  if (!spec.ok()) return spec.status();
  for (double t : options.thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("threshold %g outside [0, 1]", t));
    }
  }
  if (options.ece && options.ece_bins < 1) {
    return absl::InvalidArgumentError("ECE bin count must be >= 1");
  }
  for (const LabeledScore& ex : examples) {
    if (absl::StatusOr<LabeledScore> ok = Validate(ex); !ok.ok()) {
      return ok.status();
    }
  }
  const SweepResultRow base =
      RowTemplate(cell, static_cast<int64_t>(examples.size()), seed);
  std::vector<SweepResultRow> rows;
  EvaluateRanking(examples, *spec, cell, options, seed, base, rows);
  if (options.ece) {
    EvaluateCalibration(examples, *spec, cell, options, seed, base, rows);
  }
  if (options.timing) {
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    for (SweepResultRow& row : rows) row.wall_ms = ms;
  }
  return rows;
}

absl::StatusOr<CalibrationMap> FitCalibration(
    absl::Span<const LabeledScore> examples, const CellCoordinates& cell,
    const EvaluationOptions& options, CalibrationMethod method,
    uint64_t seed) {
  absl::StatusOr<PrivacySpec> spec = CellSpec(cell, options);
  if (!spec.ok()) return spec.status();
  for (const LabeledScore& ex : examples) {
    if (absl::StatusOr<LabeledScore> ok = Validate(ex); !ok.ok()) {
      return ok.status();
    }
  }
  absl::StatusOr<CellHierarchies> hier =
      ReleaseForCalibration(examples, *spec, options, seed);
  if (!hier.ok()) return hier.status();
  return FitFromHierarchies(*hier, cell, options, method);
}

absl::Status ValidateSweepConfig(const SweepConfig& config) {
  if (config.repetitions < 1) {
    return absl::InvalidArgumentError("repetitions must be >= 1");
  }
  for (int64_t m : config.sizes) {
    if (m < 1) return absl::InvalidArgumentError("M values must be >= 1");
  }
  for (int b : config.buckets) {
    if (b < 1) return absl::InvalidArgumentError("B values must be >= 1");
  }
  for (int h : config.heights) {
    if (h < 1 || LeafCount(config.evaluation.fanout, h) < 0) {
      return absl::InvalidArgumentError(
          absl::StrFormat("h = %d is outside the supported range", h));
    }
  }
  if (config.evaluation.fanout < 2) {
    return absl::InvalidArgumentError("fanout must be >= 2");
  }
  for (double e : config.epsilons) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("epsilon values must be > 0, got %g", e));
    }
  }
  for (double t : config.evaluation.thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("threshold %g outside [0, 1]", t));
    }
  }
  if (config.evaluation.ece_bins < 1) {
    return absl::InvalidArgumentError("ece_bins must be >= 1");
  }
  if (!config.data_path.has_value()) {
    if (!(config.balance > 0.0 && config.balance < 1.0)) {
      return absl::InvalidArgumentError("balance must lie in (0, 1)");
    }
    if (absl::Status s = ValidateWellBehavedSpec(config.data_spec); !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

absl::Status RunSweep(const SweepConfig& config,
                      absl::Span<const LabeledScore> loaded,
                      const std::function<void(const SweepResultRow&)>& sink,
                      int threads) {
  if (absl::Status s = ValidateSweepConfig(config); !s.ok()) return s;
  std::vector<int64_t> sizes = config.sizes;
  if (config.data_path.has_value()) {
    if (sizes.empty()) sizes.push_back(static_cast<int64_t>(loaded.size()));
    for (int64_t m : sizes) {
      if (m > static_cast<int64_t>(loaded.size())) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "M = %d exceeds the %d examples in the data file", m,
            loaded.size()));
      }
    }
  }
  std::vector<CellCoordinates> cells;
  for (Regime regime : config.regimes) {
    std::vector<std::optional<double>> eps;
    if (regime == Regime::kSecureAgg) {
      eps.push_back(std::nullopt);
    } else {
      eps.assign(config.epsilons.begin(), config.epsilons.end());
    }
    for (const std::optional<double>& e : eps) {
      for (int h : config.heights) {
        for (int b : config.buckets) cells.push_back({regime, e, h, b});
      }
    }
  }
  std::vector<std::pair<int64_t, int>> groups;
  if (!cells.empty()) {
    for (int64_t m : sizes) {
      for (int rep = 0; rep < config.repetitions; ++rep) {
        groups.push_back({m, rep});
      }
    }
  }

  auto run_group = [&](size_t g) -> absl::StatusOr<std::vector<SweepResultRow>> {
    const auto [m, rep] = groups[g];
    const uint64_t data_seed = DeriveSeed(
        config.seed, {kTagDataGen, static_cast<uint64_t>(m),
                      static_cast<uint64_t>(rep)});
    std::vector<LabeledScore> data;
    if (config.data_path.has_value()) {
      data.assign(loaded.begin(), loaded.end());
      if (m < static_cast<int64_t>(data.size())) {
        Rng rng = MakeRng(data_seed);
        std::shuffle(data.begin(), data.end(), rng);
        data.resize(m);
      }
    } else {
      absl::StatusOr<std::vector<LabeledScore>> gen =
          GenWellBehaved(m, config.data_spec, config.balance, data_seed);
      if (!gen.ok()) return gen.status();
      data = *std::move(gen);
    }
    std::vector<SweepResultRow> rows;
    for (const CellCoordinates& cell : cells) {
      const uint64_t cell_seed = DeriveSeed(
          config.seed,
          {kTagCell, static_cast<uint64_t>(m), static_cast<uint64_t>(rep),
           static_cast<uint64_t>(cell.regime),
           DoubleBits(cell.epsilon.value_or(0.0)),
           static_cast<uint64_t>(cell.height),
           static_cast<uint64_t>(cell.buckets)});
      absl::StatusOr<std::vector<SweepResultRow>> cell_rows =
          EvaluateCell(data, cell, config.evaluation, cell_seed);
      if (!cell_rows.ok()) return cell_rows.status();
      rows.insert(rows.end(), cell_rows->begin(), cell_rows->end());
    }
    return rows;
  };

  std::vector<std::optional<absl::StatusOr<std::vector<SweepResultRow>>>>
      results(groups.size());
  std::mutex mu;
  std::condition_variable ready;
  size_t next_group = 0;
  bool abort = false;
  auto worker = [&] {
    while (true) {
      size_t g;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (abort || next_group >= groups.size()) return;
        g = next_group++;
      }
      absl::StatusOr<std::vector<SweepResultRow>> rows = run_group(g);
      {
        std::lock_guard<std::mutex> lock(mu);
        results[g] = std::move(rows);
      }
      ready.notify_all();
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::clamp<int>(threads, 1, std::max<int>(1, groups.size()));
  for (int i = 0; i < workers; ++i) pool.emplace_back(worker);

  absl::Status status = absl::OkStatus();
  for (size_t g = 0; g < groups.size(); ++g) {
    absl::StatusOr<std::vector<SweepResultRow>> rows;
    {
      std::unique_lock<std::mutex> lock(mu);
      ready.wait(lock, [&] { return results[g].has_value(); });
      rows = *std::move(results[g]);
      results[g].reset();
    }
    if (!rows.ok()) {
      status = rows.status();
      std::lock_guard<std::mutex> lock(mu);
      abort = true;
      break;
    }
    for (const SweepResultRow& row : *rows) sink(row);
  }
  for (std::thread& t : pool) t.join();
  return status;
}

absl::StatusOr<std::vector<SweepResultRow>> RunSweep(
    const SweepConfig& config, absl::Span<const LabeledScore> loaded,
    int threads) {
  std::vector<SweepResultRow> rows;
  absl::Status status = RunSweep(
      config, loaded, [&](const SweepResultRow& row) { rows.push_back(row); },
      threads);
  if (!status.ok()) return status;
  return rows;
}

}  // namespace fedcal
