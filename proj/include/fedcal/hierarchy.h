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

// Hierarchical (f-adic) count structures over the score range [0, 1] and the
// quantile-bucketed score histograms assembled from them.
//
// Level k of a hierarchy of height h splits [0, 1] into f^k equal segments.
// Scores are discretized to one of f^h leaf cells; cell i covers
// (i / f^h, (i + 1) / f^h], with score 0 assigned to cell 0. A prefix query
// for leaf index r therefore counts the examples with score <= r / f^h, and a
// histogram bucket bounded by leaf-aligned reals r_{j-1} < r_j holds exactly
// the scores in (r_{j-1}, r_j].

#ifndef FEDCAL_HIERARCHY_H_
#define FEDCAL_HIERARCHY_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "fedcal/types.h"

namespace fedcal {

// Largest number of leaves a hierarchy may have.
inline constexpr int64_t kMaxLeaves = int64_t{1} << 22;

// fanout^exponent, or -1 if the result exceeds kMaxLeaves.
int64_t LeafCount(int fanout, int exponent);

// Leaf cell of `score` among `num_leaves` cells: ceil(score * num_leaves) - 1,
// clamped to [0, num_leaves - 1].
int64_t LeafIndex(double score, int64_t num_leaves);

// Per-level counts for one class population.
class HierarchicalCounts {
 public:
  // `levels[k - 1]` must hold fanout^k entries for k = 1..height.
  static absl::StatusOr<HierarchicalCounts> Create(
      const PrivacySpec& spec, std::vector<std::vector<NoisyCount>> levels);

  // An all-zero structure, as produced by an empty client population.
  static absl::StatusOr<HierarchicalCounts> Zero(const PrivacySpec& spec);

  // Nodewise sum of two structures with identical shape.
  static absl::StatusOr<HierarchicalCounts> Sum(const HierarchicalCounts& a,
                                                const HierarchicalCounts& b);

  const PrivacySpec& spec() const { return spec_; }
  int height() const { return spec_.height(); }
  int fanout() const { return spec_.fanout(); }
  int64_t num_leaves() const { return num_leaves_; }

  // k is 1-based; level k has fanout^k entries.
  absl::Span<const NoisyCount> level(int k) const { return levels_[k - 1]; }

  // Sum of the level-1 entries; equal to PrefixCount(num_leaves()).
  NoisyCount population_total() const;

  bool operator==(const HierarchicalCounts&) const = default;

 private:
  HierarchicalCounts(const PrivacySpec& spec,
                     std::vector<std::vector<NoisyCount>> levels,
                     int64_t num_leaves)
      : spec_(spec), levels_(std::move(levels)), num_leaves_(num_leaves) {}

  PrivacySpec spec_;
  std::vector<std::vector<NoisyCount>> levels_;
  int64_t num_leaves_;
};

struct ClassHierarchies {
  HierarchicalCounts positive;
  HierarchicalCounts negative;
};

// Builds the hierarchy of the examples whose label equals `class_filter`.
//
//  * kSecureAgg: exact per-segment counts.
//  * kDistDp: exact counts plus, on every node, the sum of one Polya noise
//    share per client, calibrated so the aggregate is discrete Laplace with
//    alpha = exp(-epsilon / h) (each example touches h nodes).
//  * kLocalDp: every example (and every empty client) is a reporting unit.
//    Units are shuffled with the seed and dealt round-robin into h groups;
//    group k reports its level-k cell with OUE over a joint domain of
//    2 * f^k indices (positive cells, then negative cells), so each unit sends
//    a single report covering both classes. Decoded counts are rescaled by
//    M / |group k|. The advertised variance is the OUE variance with a
//    plug-in correction for frequent cells, plus a plug-in estimate of the
//    group sampling variance.
//
// Calling this with the same seed for both labels yields the two halves of
// BuildClassHierarchies(shards, spec, seed).
absl::StatusOr<HierarchicalCounts> BuildHierarchy(
    absl::Span<const ClientShard> shards, Label class_filter,
    const PrivacySpec& spec, uint64_t seed);

absl::StatusOr<ClassHierarchies> BuildClassHierarchies(
    absl::Span<const ClientShard> shards, const PrivacySpec& spec,
    uint64_t seed);

// Estimated number of examples with leaf index < r, from the greedy
// decomposition of [0, r) into aligned nodes (at most f - 1 per level).
// The variance is the sum of the variances of the nodes used.
absl::StatusOr<NoisyCount> PrefixCount(const HierarchicalCounts& counts,
                                       int64_t r);

// PrefixCount(b) - PrefixCount(a) for a <= b. Nodes shared by both
// decompositions cancel, so they do not contribute to the variance.
absl::StatusOr<NoisyCount> RangeCount(const HierarchicalCounts& counts,
                                      int64_t a, int64_t b);

// Smallest leaf index r with PrefixCount(r) >= target_rank, found by binary
// search over the raw (possibly non-monotone) prefix estimates. The target is
// clamped to [0, population_total].
int64_t FindQuantileLeaf(const HierarchicalCounts& counts, double target_rank);

// FindQuantileLeaf(...) / num_leaves.
double FindQuantile(const HierarchicalCounts& counts, double target_rank);

struct HistogramOptions {
  // Buckets wider than f^(slack - ceil(log_f B)) are split at aligned leaf
  // boundaries so no bucket is wider than O(1/B). nullopt disables splitting.
  std::optional<int> width_cap_slack = 1;
};

// B quantile buckets with per-class (possibly noisy) counts.
class ScoreHistogram {
 public:
  // `boundaries` must start at 0, end at 1 and be strictly increasing.
  // `leaf_width` is the discretization step of the underlying hierarchy
  // (0 for a histogram that was not derived from one).
  static absl::StatusOr<ScoreHistogram> Create(
      std::vector<double> boundaries, std::vector<NoisyCount> positive,
      std::vector<NoisyCount> negative, double leaf_width = 0.0,
      Regime regime = Regime::kSecureAgg);

  int num_buckets() const { return static_cast<int>(positive_.size()); }
  absl::Span<const double> boundaries() const { return boundaries_; }
  absl::Span<const NoisyCount> positive_counts() const { return positive_; }
  absl::Span<const NoisyCount> negative_counts() const { return negative_; }
  NoisyCount positive_total() const { return positive_total_; }
  NoisyCount negative_total() const { return negative_total_; }
  double leaf_width() const { return leaf_width_; }
  Regime regime() const { return regime_; }

 private:
  ScoreHistogram(std::vector<double> boundaries,
                 std::vector<NoisyCount> positive,
                 std::vector<NoisyCount> negative, double leaf_width,
                 Regime regime);

  std::vector<double> boundaries_;
  std::vector<NoisyCount> positive_;
  std::vector<NoisyCount> negative_;
  NoisyCount positive_total_;
  NoisyCount negative_total_;
  double leaf_width_;
  Regime regime_;
};

// Leaf-aligned bucket boundaries 0 = r_0 < ... < r_n = num_leaves for a
// B-bucket equi-depth histogram of `combined`: r_j is the quantile at rank
// j * total / B, duplicates are merged and wide buckets are split per
// `options`.
absl::StatusOr<std::vector<int64_t>> QuantileLeafBoundaries(
    const HierarchicalCounts& combined, int num_buckets,
    const HistogramOptions& options = {});

// Bucket counts for fixed leaf boundaries, as differences of prefix counts.
absl::StatusOr<ScoreHistogram> HistogramFromLeafBoundaries(
    const HierarchicalCounts& positive, const HierarchicalCounts& negative,
    absl::Span<const int64_t> leaf_boundaries);

// Quantile boundaries from the nodewise sum of both classes, then counts.
absl::StatusOr<ScoreHistogram> BuildScoreHistogram(
    const HierarchicalCounts& positive, const HierarchicalCounts& negative,
    int num_buckets, const HistogramOptions& options = {});

}  // namespace fedcal

#endif  // FEDCAL_HIERARCHY_H_
