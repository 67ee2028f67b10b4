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

// Federated estimators for precision, recall, accuracy and ROC AUC.

#ifndef FEDCAL_METRICS_H_
#define FEDCAL_METRICS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "fedcal/hierarchy.h"
#include "fedcal/types.h"

namespace fedcal {

// Raw (possibly noisy) counters behind a precision/recall/accuracy estimate.
struct PraCounters {
  NoisyCount true_positive;
  NoisyCount predicted_positive;
  NoisyCount positives;
  NoisyCount correct;
  NoisyCount total;
};

// Metrics whose denominator was not positive are absent and listed in
// `degenerate`. Present values are clamped to [0, 1].
struct PraEstimate {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
  double effective_threshold = 0.0;
  double threshold_slack = 0.0;
  PraCounters counters;
  std::vector<std::string> degenerate;
};

struct Prediction {
  bool predicted_positive = false;
  Label label = Label::kNegative;
};

struct PredictionShard {
  std::vector<Prediction> predictions;
};

// Predictions of the rule score > threshold, shard by shard.
std::vector<PredictionShard> PredictAtThreshold(
    absl::Span<const ClientShard> shards, double threshold);

// Estimates for a fixed classifier. The four confusion cells are aggregated
// as one histogram (each example touches one cell): exactly under secure
// aggregation, with discrete Laplace noise of parameter exp(-epsilon) under
// distributed DP, and through one OUE report per example (NONE for clients
// without examples) under local DP. The number of examples is public.
// Fails with FailedPrecondition only when every metric is degenerate.
absl::StatusOr<PraEstimate> PraFixed(absl::Span<const PredictionShard> shards,
                                     const PrivacySpec& spec, uint64_t seed);

// Estimates for the rule score > T read off a histogram. T is snapped to the
// nearest bucket boundary (ties to the lower one); the slack is
// |T - T'| + leaf width.
absl::StatusOr<PraEstimate> PraThreshold(const ScoreHistogram& hist,
                                         double threshold);

struct AucEstimate {
  double value = 0.0;
  // (1 / 2PN) * sum_i p_i n_i: the exact AUC lies within this distance of
  // `value` when the counts are exact.
  double bucketization_halfwidth = 0.0;
  // First-order variance from the count noise, treating buckets as
  // independent and the totals as fixed. Zero without noise.
  double noise_variance = 0.0;
};

// (1 / PN) * sum_i p_i * (sum_{j<i} n_j + n_i / 2), computed in O(B).
// Fails with FailedPrecondition unless both class totals are positive.
absl::StatusOr<AucEstimate> AucHistogram(const ScoreHistogram& hist);

}  // namespace fedcal

#endif  // FEDCAL_METRICS_H_
