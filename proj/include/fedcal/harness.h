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

// Synthetic data, client splitting policies and experiment sweeps.

#ifndef FEDCAL_HARNESS_H_
#define FEDCAL_HARNESS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "absl/types/span.h"
#include "fedcal/calibration.h"
#include "fedcal/hierarchy.h"
#include "fedcal/types.h"

namespace fedcal {

// Draws `count` examples. Each label is positive with probability `balance`.
// Within a class, a spike location is emitted with that spike's class mass;
// otherwise the score comes from a smooth density with slope at most the
// Lipschitz constant: 1 + l(s - 1/2) for positives when l <= 2, the ramp
// l * max(0, s - a) with a = 1 - sqrt(2 / l) when l > 2, and the mirror image
// of the positive density for negatives.
absl::StatusOr<std::vector<LabeledScore>> GenWellBehaved(
    int64_t count, const WellBehavedSpec& spec, double balance, uint64_t seed);

struct SplitPolicy {
  enum class Kind { kOnePerClient, kSkewedByClass, kVariableSize };
  Kind kind = Kind::kOnePerClient;
  // Positive fraction for kSkewedByClass; mean shard size for kVariableSize.
  double parameter = 0.0;
};

// "one_per_client", "skewed:<rho>" or "variable:<mean size>".
absl::StatusOr<SplitPolicy> ParseSplitPolicy(absl::string_view text);
std::string SplitPolicyName(const SplitPolicy& policy);

// Distributes the examples over clients; the multiset union of the shards
// equals the input.
//  * one-per-client: one singleton shard per example, in input order.
//  * skewed-by-class(rho): M shards; ceil(rho * P) positives are dealt
//    round-robin onto the first ceil(rho * M) shards and everything else onto
//    the remaining ones (onto all shards if none remain).
//  * variable-size(mean): shuffled examples cut into shards with
//    Poisson(mean) sizes; empty shards are kept.
absl::StatusOr<std::vector<ClientShard>> SplitToClients(
    absl::Span<const LabeledScore> examples, const SplitPolicy& policy,
    uint64_t seed);

enum class CalibrationMethod { kHistogram, kBbq };

// How the privacy budget is shared between choosing bucket boundaries and
// counting. kShared reads both from one release. kSplit runs two releases at
// epsilon / 2 each; it has no effect under SecureAgg.
enum class BoundaryBudget : uint8_t { kShared, kSplit };

// What to compute for each evaluated cell.
struct EvaluationOptions {
  std::vector<double> thresholds;
  bool auc = true;
  bool pra = true;
  bool ece = false;
  std::vector<CalibrationMethod> calibration = {CalibrationMethod::kHistogram};
  int ece_bins = 10;
  // Compare the AUC against the strict-inequality convention instead of
  // counting ties as one half.
  bool strict_ties = false;
  SplitPolicy split;
  HistogramOptions histogram;
  NoiseSimulation simulation = NoiseSimulation::kPooled;
  int fanout = 2;
  BoundaryBudget boundary_budget = BoundaryBudget::kShared;
  bool timing = false;
};

struct CellCoordinates {
  Regime regime = Regime::kSecureAgg;
  std::optional<double> epsilon;
  int height = 10;
  int buckets = 10;
};

struct SweepResultRow {
  std::string metric;
  Regime regime = Regime::kSecureAgg;
  int64_t num_examples = 0;
  int buckets = 0;
  int height = 0;
  std::optional<double> epsilon;
  std::optional<double> threshold;
  std::optional<double> estimate;
  std::optional<double> exact;
  std::optional<double> abs_error;
  std::optional<double> advertised_uncertainty;
  uint64_t seed = 0;
  double wall_ms = 0.0;
  std::optional<std::string> degenerate;
};

// Runs one cell on `examples` and returns its rows in fixed order: auc, then
// precision/recall/accuracy per threshold, then one ece row per calibration
// method. AUC and thresholded metrics use all examples. ECE rows calibrate on
// the even-indexed examples and measure the odd-indexed ones, so their exact
// value is 0. Statistical failures are recorded in the rows; only invalid
// parameters return an error.
// Splits `examples` into clients, releases the cell's hierarchies and fits a
// calibration map with `method`. Invalid parameters and statistical failures
// both return an error.
absl::StatusOr<CalibrationMap> FitCalibration(
    absl::Span<const LabeledScore> examples, const CellCoordinates& cell,
    const EvaluationOptions& options, CalibrationMethod method, uint64_t seed);

absl::StatusOr<std::vector<SweepResultRow>> EvaluateCell(
    absl::Span<const LabeledScore> examples, const CellCoordinates& cell,
    const EvaluationOptions& options, uint64_t seed);

struct SweepConfig {
  // Data comes from this CSV file when set, otherwise from the generator.
  std::optional<std::string> data_path;
  WellBehavedSpec data_spec;
  double balance = 0.5;
  // Population sizes; empty with a data file means the whole file.
  std::vector<int64_t> sizes;
  std::vector<int> buckets;
  std::vector<int> heights;
  std::vector<double> epsilons;
  std::vector<Regime> regimes;
  int repetitions = 1;
  uint64_t seed = 0;
  EvaluationOptions evaluation;
};

absl::Status ValidateSweepConfig(const SweepConfig& config);

// Calls `sink` once per row, in order of (M, repetition, regime, epsilon,
// height, B) and then per-cell row order. Secure aggregation ignores the
// epsilon grid. The data for a (M, repetition) pair is shared by all cells
// that use it; every cell draws its noise from a seed derived from the base
// seed and its coordinates. Up to `threads` data groups run concurrently.
// Empty grids produce no rows. `loaded` supplies the data when
// `config.data_path` is set.
absl::Status RunSweep(const SweepConfig& config,
                      absl::Span<const LabeledScore> loaded,
                      const std::function<void(const SweepResultRow&)>& sink,
                      int threads = 1);

absl::StatusOr<std::vector<SweepResultRow>> RunSweep(
    const SweepConfig& config, absl::Span<const LabeledScore> loaded = {},
    int threads = 1);

}  // namespace fedcal

#endif  // FEDCAL_HARNESS_H_
