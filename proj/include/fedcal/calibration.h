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

// Histogram-binning and BBQ calibration maps, and expected calibration error.
//
// Calibration maps are not forced to be monotone in the score.

#ifndef FEDCAL_CALIBRATION_H_
#define FEDCAL_CALIBRATION_H_

#include <optional>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "fedcal/hierarchy.h"
#include "fedcal/types.h"

namespace fedcal {

// One binning: boundaries rise strictly from 0 to 1. Bucket j covers
// (boundaries[j], boundaries[j + 1]], with score 0 in bucket 0, and maps to
// values[j].
struct Binning {
  std::vector<double> boundaries;
  std::vector<double> values;
};

class CalibrationMap {
 public:
  // Values must lie in [0, 1]; weights must be nonnegative and sum to 1
  // within 1e-12.
  static absl::StatusOr<CalibrationMap> Create(std::vector<Binning> binnings,
                                               std::vector<double> weights);

  absl::Span<const Binning> binnings() const { return binnings_; }
  absl::Span<const double> weights() const { return weights_; }

 private:
  CalibrationMap(std::vector<Binning> binnings, std::vector<double> weights)
      : binnings_(std::move(binnings)), weights_(std::move(weights)) {}

  std::vector<Binning> binnings_;
  std::vector<double> weights_;
};

// Bucket value p / (p + n) on counts clamped at zero. Buckets whose clamped
// total is at most 1e-9 times the estimated population get `prior`, which
// defaults to the overall positive fraction (or 1/2 if that is undefined).
CalibrationMap CalibrateHistogram(const ScoreHistogram& hist,
                                  std::optional<double> prior = std::nullopt);

struct BbqOptions {
  int max_candidates = 15;
  // Beta prior strength per binning.
  double equivalent_sample_size = 2.0;
  HistogramOptions histogram;
  // When set, candidate boundaries come from this hierarchy instead of the
  // sum of the class hierarchies. Must share their height and fanout.
  const HierarchicalCounts* boundary_source = nullptr;
};

struct BbqCandidate {
  int num_buckets = 0;
  double log_score = 0.0;
  double weight = 0.0;
};

// Candidate bucket counts on a geometric grid over
// [max(1, ceil(cbrt(M) / 10)), floor(10 * cbrt(M))].
absl::StatusOr<std::vector<int>> BbqCandidateBuckets(double population,
                                                     int max_candidates = 15);

// Scores each candidate binning of the two hierarchies by its Beta-binomial
// marginal likelihood. Bucket b of a B-bucket binning gets prior
// Beta(m_b * s / B, (1 - m_b) * s / B), where m_b is the bucket midpoint and
// s the equivalent sample size. Weights are the normalized scores.
absl::StatusOr<std::vector<BbqCandidate>> BbqWeights(
    const HierarchicalCounts& positive, const HierarchicalCounts& negative,
    double population, const BbqOptions& options = {});

// Histogram-calibrated binnings of every candidate, mixed by BBQ weight.
absl::StatusOr<CalibrationMap> BbqCalibrate(const HierarchicalCounts& positive,
                                            const HierarchicalCounts& negative,
                                            double population,
                                            const BbqOptions& options = {});

// Weighted mixture of the bucket values containing `score`.
double ApplyCalibration(const CalibrationMap& map, double score);

enum class EceBinning { kEqualWidth, kEqualFrequency };

struct EceBin {
  double upper = 0.0;
  int64_t count = 0;
  double mass = 0.0;
  double observed = 0.0;
  double expected = 0.0;
};

struct EceReport {
  int num_bins = 0;
  std::vector<EceBin> bins;
  double ece = 0.0;
};

// sum_j mass_j * |observed_j - expected_j| over K bins. Equal-width bin j
// (1-based) covers ((j - 1) / K, j / K], with 0 in bin 1. Equal-frequency
// bins hold consecutive runs of the sorted predictions of near-equal size.
// Empty bins contribute 0. The score field carries the predicted probability.
absl::StatusOr<EceReport> Ece(absl::Span<const LabeledScore> predictions,
                              int num_bins,
                              EceBinning binning = EceBinning::kEqualWidth);

// ece recomputed from the per-bin fields.
double EceFromBins(const EceReport& report);

}  // namespace fedcal

#endif  // FEDCAL_CALIBRATION_H_
