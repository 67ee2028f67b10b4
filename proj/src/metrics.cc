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

#include "fedcal/metrics.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedcal/privacy.h"
#include "fedcal/random.h"

namespace fedcal {
namespace {

enum Cell { kTruePositive = 0, kFalseNegative, kFalsePositive, kTrueNegative };

int CellOf(const Prediction& p) {
  const bool positive = p.label == Label::kPositive;
  if (positive) return p.predicted_positive ? kTruePositive : kFalseNegative;
  return p.predicted_positive ? kFalsePositive : kTrueNegative;
}

std::string FormatCount(const NoisyCount& c) {
  return absl::StrFormat("%.17g (var %.17g)", c.value, c.variance);
}

std::optional<double> Ratio(const NoisyCount& num, const NoisyCount& den) {
  if (!(den.value > 0.0)) return std::nullopt;
  return std::clamp(std::max(num.value, 0.0) / den.value, 0.0, 1.0);
}

absl::StatusOr<PraEstimate> Finish(PraCounters counters, double effective,
                                   double slack) {
  PraEstimate est;
  est.counters = counters;
  est.effective_threshold = effective;
  est.threshold_slack = slack;
  est.precision = Ratio(counters.true_positive, counters.predicted_positive);
  est.recall = Ratio(counters.true_positive, counters.positives);
  est.accuracy = Ratio(counters.correct, counters.total);
  if (!est.precision) est.degenerate.push_back("precision");
  if (!est.recall) est.degenerate.push_back("recall");
  if (!est.accuracy) est.degenerate.push_back("accuracy");
  if (est.degenerate.size() == 3) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "degenerate estimate: true_positive=%s predicted_positive=%s "
        "positives=%s correct=%s total=%s",
        FormatCount(counters.true_positive),
        FormatCount(counters.predicted_positive),
        FormatCount(counters.positives), FormatCount(counters.correct),
        FormatCount(counters.total)));
  }
  return est;
}

absl::StatusOr<std::vector<NoisyCount>> AggregateCells(
    absl::Span<const PredictionShard> shards, const PrivacySpec& spec,
    uint64_t seed) {
  std::vector<int64_t> exact(4, 0);
  for (const PredictionShard& shard : shards) {
    for (const Prediction& p : shard.predictions) ++exact[CellOf(p)];
  }
  std::vector<NoisyCount> cells(4);
  for (int i = 0; i < 4; ++i) cells[i].value = static_cast<double>(exact[i]);
  if (shards.empty() || spec.regime() == Regime::kSecureAgg) return cells;

  if (spec.regime() == Regime::kDistDp) {
    absl::StatusOr<PolyaShareParams> params = PolyaShareParams::ForClients(
        static_cast<int64_t>(shards.size()), spec.epsilon());
    if (!params.ok()) return params.status();
    if (spec.simulation() == NoiseSimulation::kPerClient) {
      for (size_t c = 0; c < shards.size(); ++c) {
        Rng rng = MakeRng(seed, {kTagCounters, c});
        for (NoisyCount& cell : cells) {
          cell.value += static_cast<double>(DistDpNoiseShare(*params, rng));
        }
      }
    } else {
      absl::StatusOr<PolyaShareParams> pooled =
          PolyaShareParams::Create(1.0, params->alpha());
      if (!pooled.ok()) return pooled.status();
      Rng rng = MakeRng(seed, {kTagCounters});
      for (NoisyCount& cell : cells) {
        cell.value += static_cast<double>(DistDpNoiseShare(*pooled, rng));
      }
    }
    for (NoisyCount& cell : cells) {
      cell.variance = DiscreteLaplaceVariance(params->alpha());
    }
    return cells;
  }

  absl::StatusOr<OueParams> params = OueParams::Create(spec.epsilon(), 4);
  if (!params.ok()) return params.status();
  int64_t reports = 0;
  std::vector<int64_t> bit_sums(4, 0);
  if (spec.simulation() == NoiseSimulation::kPerClient) {
    for (size_t c = 0; c < shards.size(); ++c) {
      const auto& preds = shards[c].predictions;
      const size_t units = std::max<size_t>(preds.size(), 1);
      for (size_t i = 0; i < units; ++i) {
        std::optional<int64_t> value;
        if (!preds.empty()) value = CellOf(preds[i]);
        Rng rng = MakeRng(seed, {kTagCounters, c, i});
        absl::StatusOr<std::vector<uint8_t>> bits =
            OueEncode(value, *params, rng);
        if (!bits.ok()) return bits.status();
        for (int v = 0; v < 4; ++v) bit_sums[v] += (*bits)[v];
        ++reports;
      }
    }
  } else {
    for (const PredictionShard& shard : shards) {
      reports += std::max<int64_t>(shard.predictions.size(), 1);
    }
    Rng rng = MakeRng(seed, {kTagCounters});
    bit_sums = OueSamplePooledBitSums(exact, reports, *params, rng);
  }
  return OueDecode(bit_sums, reports, *params);
}

}  // namespace

std::vector<PredictionShard> PredictAtThreshold(
    absl::Span<const ClientShard> shards, double threshold) {
  std::vector<PredictionShard> out(shards.size());
  for (size_t c = 0; c < shards.size(); ++c) {
    for (const LabeledScore& ex : shards[c].examples) {
      out[c].predictions.push_back({ex.score > threshold, ex.label});
    }
  }
  return out;
}

absl::StatusOr<PraEstimate> PraFixed(absl::Span<const PredictionShard> shards,
                                     const PrivacySpec& spec, uint64_t seed) {
  absl::StatusOr<std::vector<NoisyCount>> cells =
      AggregateCells(shards, spec, seed);
  if (!cells.ok()) return cells.status();
  const std::vector<NoisyCount>& c = *cells;
  int64_t num_examples = 0;
  for (const PredictionShard& shard : shards) {
    num_examples += static_cast<int64_t>(shard.predictions.size());
  }
  PraCounters counters;
  counters.true_positive = c[kTruePositive];
  counters.predicted_positive = c[kTruePositive] + c[kFalsePositive];
  counters.positives = c[kTruePositive] + c[kFalseNegative];
  counters.correct = c[kTruePositive] + c[kTrueNegative];
  counters.total = {static_cast<double>(num_examples), 0.0};
  return Finish(counters, 0.0, 0.0);
}

absl::StatusOr<PraEstimate> PraThreshold(const ScoreHistogram& hist,
                                         double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("threshold must lie in [0, 1], got %g", threshold));
  }
  absl::Span<const double> bounds = hist.boundaries();
  // First boundary >= T; compare with its predecessor.
  size_t t = std::lower_bound(bounds.begin(), bounds.end(), threshold) -
             bounds.begin();
  if (t > 0 && (t == bounds.size() ||
                threshold - bounds[t - 1] <= bounds[t] - threshold)) {
    --t;
  }
  const double effective = bounds[t];

  PraCounters counters;
  NoisyCount true_negative;
  for (int i = 0; i < hist.num_buckets(); ++i) {
    const NoisyCount& p = hist.positive_counts()[i];
    const NoisyCount& n = hist.negative_counts()[i];
    if (static_cast<size_t>(i) >= t) {
      counters.true_positive += p;
      counters.predicted_positive += p + n;
    } else {
      true_negative += n;
    }
  }
  counters.positives = hist.positive_total();
  counters.correct = counters.true_positive + true_negative;
  counters.total = hist.positive_total() + hist.negative_total();
  return Finish(counters, effective,
                std::abs(threshold - effective) + hist.leaf_width());
}

absl::StatusOr<AucEstimate> AucHistogram(const ScoreHistogram& hist) {
  const double pos = hist.positive_total().value;
  const double neg = hist.negative_total().value;
  if (!(pos > 0.0) || !(neg > 0.0)) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "degenerate AUC estimate: positives=%.17g negatives=%.17g", pos, neg));
  }
  double numerator = 0.0;
  double same_bucket = 0.0;
  double variance = 0.0;
  double below = 0.0;
  double below_var = 0.0;
  for (int i = 0; i < hist.num_buckets(); ++i) {
    const NoisyCount& p = hist.positive_counts()[i];
    const NoisyCount& n = hist.negative_counts()[i];
    const double weight = below + 0.5 * n.value;
    const double weight_var = below_var + 0.25 * n.variance;
    numerator += p.value * weight;
    same_bucket += p.value * n.value;
    variance += weight * weight * p.variance + p.value * p.value * weight_var +
                p.variance * weight_var;
    below += n.value;
    below_var += n.variance;
  }
  const double scale = pos * neg;
  AucEstimate est;
  est.value = numerator / scale;
  est.bucketization_halfwidth = std::max(0.0, same_bucket / (2.0 * scale));
  est.noise_variance = variance / (scale * scale);
  return est;
}

}  // namespace fedcal
