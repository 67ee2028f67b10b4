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

#include "fedcal/hierarchy.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedcal/privacy.h"
#include "fedcal/random.h"

namespace fedcal {
namespace {

constexpr uint64_t kPooledPath = uint64_t{1} << 40;

int HalfIndex(Label label) { return label == Label::kPositive ? 0 : 1; }

absl::StatusOr<int64_t> CheckedLeafCount(const PrivacySpec& spec) {
  const int64_t leaves = LeafCount(spec.fanout(), spec.height());
  if (leaves < 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "fanout^height = %d^%d exceeds the supported %d leaves",
        spec.fanout(), spec.height(), kMaxLeaves));
  }
  return leaves;
}

absl::Status ValidateShards(absl::Span<const ClientShard> shards) {
  for (size_t c = 0; c < shards.size(); ++c) {
    for (size_t i = 0; i < shards[c].examples.size(); ++i) {
      absl::StatusOr<LabeledScore> ok = Validate(shards[c].examples[i]);
      if (!ok.ok()) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "client %d example %d: %s", c, i, ok.status().message()));
      }
    }
  }
  return absl::OkStatus();
}

// Exact per-level counts of one class; levels[k - 1] has fanout^k entries.
std::vector<std::vector<int64_t>> ExactLevels(
    absl::Span<const ClientShard> shards, Label label, int fanout, int height,
    int64_t num_leaves) {
  std::vector<std::vector<int64_t>> levels(height);
  levels[height - 1].assign(num_leaves, 0);
  for (const ClientShard& shard : shards) {
    for (const LabeledScore& ex : shard.examples) {
      if (ex.label == label) ++levels[height - 1][LeafIndex(ex.score, num_leaves)];
    }
  }
  for (int k = height - 1; k >= 1; --k) {
    const std::vector<int64_t>& child = levels[k];
    std::vector<int64_t>& parent = levels[k - 1];
    parent.assign(child.size() / fanout, 0);
    for (size_t i = 0; i < child.size(); ++i) parent[i / fanout] += child[i];
  }
  return levels;
}

std::vector<std::vector<NoisyCount>> ToNoisy(
    const std::vector<std::vector<int64_t>>& exact) {
  std::vector<std::vector<NoisyCount>> out(exact.size());
  for (size_t k = 0; k < exact.size(); ++k) {
    out[k].reserve(exact[k].size());
    for (int64_t v : exact[k]) out[k].push_back({static_cast<double>(v), 0.0});
  }
  return out;
}

absl::StatusOr<HierarchicalCounts> BuildDistDp(
    absl::Span<const ClientShard> shards, Label label, const PrivacySpec& spec,
    uint64_t seed, int64_t num_leaves) {
  std::vector<std::vector<NoisyCount>> levels = ToNoisy(
      ExactLevels(shards, label, spec.fanout(), spec.height(), num_leaves));
  absl::StatusOr<PolyaShareParams> params = PolyaShareParams::ForClients(
      static_cast<int64_t>(shards.size()), spec.epsilon(), spec.height());
  if (!params.ok()) return params.status();
  const double node_variance = DiscreteLaplaceVariance(params->alpha());
  const uint64_t half = HalfIndex(label);
  if (spec.simulation() == NoiseSimulation::kPerClient) {
    for (size_t c = 0; c < shards.size(); ++c) {
      Rng rng = MakeRng(seed, {kTagDistDpNoise, half, c});
      for (auto& level : levels) {
        for (NoisyCount& node : level) {
          node.value += static_cast<double>(DistDpNoiseShare(*params, rng));
        }
      }
    }
  } else {
    // The M shares of a node sum to a difference of two Polya(1, alpha)
    // draws, which is what is sampled here.
    Rng rng = MakeRng(seed, {kTagDistDpNoise, half, kPooledPath});
    absl::StatusOr<PolyaShareParams> pooled =
        PolyaShareParams::Create(1.0, params->alpha(), spec.height());
    if (!pooled.ok()) return pooled.status();
    for (auto& level : levels) {
      for (NoisyCount& node : level) {
        node.value += static_cast<double>(DistDpNoiseShare(*pooled, rng));
      }
    }
  }
  for (auto& level : levels) {
    for (NoisyCount& node : level) node.variance = node_variance;
  }
  return HierarchicalCounts::Create(spec, std::move(levels));
}

// One reporting unit of the local model: a labeled score, or nothing for a
// client without examples.
struct Unit {
  bool present = false;
  Label label = Label::kNegative;
  int64_t leaf = 0;
};

absl::StatusOr<ClassHierarchies> BuildLocalDp(
    absl::Span<const ClientShard> shards, const PrivacySpec& spec,
    uint64_t seed, int64_t num_leaves, std::optional<Label> only) {
  std::vector<Unit> units;
  for (const ClientShard& shard : shards) {
    if (shard.examples.empty()) units.push_back(Unit{});
    for (const LabeledScore& ex : shard.examples) {
      units.push_back({true, ex.label, LeafIndex(ex.score, num_leaves)});
    }
  }
  const int h = spec.height();
  const int64_t m = static_cast<int64_t>(units.size());
  if (m < h) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "local DP needs at least height = %d reporting units, got %d", h, m));
  }
  std::vector<int64_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng group_rng = MakeRng(seed, {kTagOueGroups});
  std::shuffle(order.begin(), order.end(), group_rng);

  std::vector<std::vector<NoisyCount>> halves[2];
  halves[0].resize(h);
  halves[1].resize(h);
  for (int k = 1; k <= h; ++k) {
    const int64_t cells = LeafCount(spec.fanout(), k);
    const int64_t shift = num_leaves / cells;
    std::vector<int64_t> group;
    for (int64_t i = k - 1; i < m; i += h) group.push_back(order[i]);
    const int64_t g = static_cast<int64_t>(group.size());
    absl::StatusOr<OueParams> params = OueParams::Create(spec.epsilon(), 2 * cells);
    if (!params.ok()) return params.status();

    std::vector<int64_t> bit_sums(2 * cells, 0);
    if (spec.simulation() == NoiseSimulation::kPerClient) {
      for (int64_t u : group) {
        const Unit& unit = units[u];
        std::optional<int64_t> value;
        if (unit.present) {
          value = unit.leaf / shift + HalfIndex(unit.label) * cells;
        }
        Rng rng = MakeRng(seed, {kTagOueReport, static_cast<uint64_t>(k),
                                 static_cast<uint64_t>(u)});
        absl::StatusOr<std::vector<uint8_t>> report =
            OueEncode(value, *params, rng);
        if (!report.ok()) return report.status();
        for (int64_t v = 0; v < 2 * cells; ++v) bit_sums[v] += (*report)[v];
      }
    } else {
      std::vector<int64_t> truth[2] = {std::vector<int64_t>(cells, 0),
                                       std::vector<int64_t>(cells, 0)};
      for (int64_t u : group) {
        const Unit& unit = units[u];
        if (unit.present) ++truth[HalfIndex(unit.label)][unit.leaf / shift];
      }
      for (int half = 0; half < 2; ++half) {
        if (only.has_value() && HalfIndex(*only) != half) continue;
        Rng rng = MakeRng(seed, {kTagOueReport, static_cast<uint64_t>(k),
                                 static_cast<uint64_t>(half), kPooledPath});
        std::vector<int64_t> sums =
            OueSamplePooledBitSums(truth[half], g, *params, rng);
        std::copy(sums.begin(), sums.end(), bit_sums.begin() + half * cells);
      }
    }
    std::vector<NoisyCount> decoded = OueDecode(bit_sums, g, *params);
    const double md = static_cast<double>(m);
    const double gd = static_cast<double>(g);
    const double scale = md / gd;
    // The group is a sample without replacement of the M units; the count
    // it sees varies hypergeometrically around the population count.
    const double finite = m > 1 ? (md - gd) / (md - 1.0) : 0.0;
    // Kept bits are noisier than flipped ones; the textbook OUE variance
    // only counts the latter, which is accurate for rare cells alone.
    const double p = params->p_keep();
    const double q = params->q_flip();
    const double kept_excess = (p * (1.0 - p) - q * (1.0 - q)) / ((p - q) * (p - q));
    for (NoisyCount& c : decoded) {
      const double holders = std::clamp(c.value, 0.0, gd);
      const double share = holders / gd;
      c.value *= scale;
      c.variance = scale * scale *
                   (c.variance + holders * kept_excess +
                    gd * share * (1.0 - share) * finite);
    }
    halves[0][k - 1].assign(decoded.begin(), decoded.begin() + cells);
    halves[1][k - 1].assign(decoded.begin() + cells, decoded.end());
  }
  absl::StatusOr<HierarchicalCounts> pos =
      HierarchicalCounts::Create(spec, std::move(halves[0]));
  if (!pos.ok()) return pos.status();
  absl::StatusOr<HierarchicalCounts> neg =
      HierarchicalCounts::Create(spec, std::move(halves[1]));
  if (!neg.ok()) return neg.status();
  return ClassHierarchies{*std::move(pos), *std::move(neg)};
}

// Index range [lo, hi) of the level-k nodes in the greedy decomposition of
// the prefix [0, r).
std::pair<int64_t, int64_t> PrefixNodes(int fanout, int k, int64_t width,
                                        int64_t r) {
  const int64_t hi = r / width;
  const int64_t lo = k == 1 ? 0 : (r / (width * fanout)) * fanout;
  return {lo, hi};
}

double PrefixValue(const HierarchicalCounts& counts, int64_t r) {
  double total = 0.0;
  int64_t width = counts.num_leaves();
  for (int k = 1; k <= counts.height(); ++k) {
    width /= counts.fanout();
    auto [lo, hi] = PrefixNodes(counts.fanout(), k, width, r);
    absl::Span<const NoisyCount> level = counts.level(k);
    for (int64_t i = lo; i < hi; ++i) total += level[i].value;
  }
  return total;
}

}  // namespace

int64_t LeafCount(int fanout, int exponent) {
  int64_t n = 1;
  for (int i = 0; i < exponent; ++i) {
    n *= fanout;
    if (n > kMaxLeaves) return -1;
  }
  return n;
}

int64_t LeafIndex(double score, int64_t num_leaves) {
  const double scaled = std::ceil(score * static_cast<double>(num_leaves));
  const int64_t index = static_cast<int64_t>(scaled) - 1;
  return std::clamp<int64_t>(index, 0, num_leaves - 1);
}

absl::StatusOr<HierarchicalCounts> HierarchicalCounts::Create(
    const PrivacySpec& spec, std::vector<std::vector<NoisyCount>> levels) {
  absl::StatusOr<int64_t> leaves = CheckedLeafCount(spec);
  if (!leaves.ok()) return leaves.status();
  if (static_cast<int>(levels.size()) != spec.height()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "expected %d levels, got %d", spec.height(), levels.size()));
  }
  int64_t expected = 1;
  for (int k = 1; k <= spec.height(); ++k) {
    expected *= spec.fanout();
    if (static_cast<int64_t>(levels[k - 1].size()) != expected) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "level %d has %d entries, expected %d", k, levels[k - 1].size(),
          expected));
    }
  }
  return HierarchicalCounts(spec, std::move(levels), *leaves);
}

absl::StatusOr<HierarchicalCounts> HierarchicalCounts::Zero(
    const PrivacySpec& spec) {
  absl::StatusOr<int64_t> leaves = CheckedLeafCount(spec);
  if (!leaves.ok()) return leaves.status();
  std::vector<std::vector<NoisyCount>> levels(spec.height());
  for (int k = 1; k <= spec.height(); ++k) {
    levels[k - 1].assign(LeafCount(spec.fanout(), k), NoisyCount{});
  }
  return HierarchicalCounts(spec, std::move(levels), *leaves);
}

absl::StatusOr<HierarchicalCounts> HierarchicalCounts::Sum(
    const HierarchicalCounts& a, const HierarchicalCounts& b) {
  if (a.height() != b.height() || a.fanout() != b.fanout()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "shape mismatch: (h=%d, f=%d) vs (h=%d, f=%d)", a.height(), a.fanout(),
        b.height(), b.fanout()));
  }
  std::vector<std::vector<NoisyCount>> levels = a.levels_;
  for (size_t k = 0; k < levels.size(); ++k) {
    for (size_t i = 0; i < levels[k].size(); ++i) levels[k][i] += b.levels_[k][i];
  }
  return HierarchicalCounts(a.spec_, std::move(levels), a.num_leaves_);
}

NoisyCount HierarchicalCounts::population_total() const {
  NoisyCount total;
  for (const NoisyCount& c : levels_.front()) total += c;
  return total;
}

absl::StatusOr<HierarchicalCounts> BuildHierarchy(
    absl::Span<const ClientShard> shards, Label class_filter,
    const PrivacySpec& spec, uint64_t seed) {
  absl::StatusOr<int64_t> leaves = CheckedLeafCount(spec);
  if (!leaves.ok()) return leaves.status();
  if (absl::Status s = ValidateShards(shards); !s.ok()) return s;
  if (shards.empty()) return HierarchicalCounts::Zero(spec);
  switch (spec.regime()) {
    case Regime::kSecureAgg:
      return HierarchicalCounts::Create(
          spec, ToNoisy(ExactLevels(shards, class_filter, spec.fanout(),
                                    spec.height(), *leaves)));
    case Regime::kDistDp:
      return BuildDistDp(shards, class_filter, spec, seed, *leaves);
    case Regime::kLocalDp: {
      absl::StatusOr<ClassHierarchies> both =
          BuildLocalDp(shards, spec, seed, *leaves, class_filter);
      if (!both.ok()) return both.status();
      return class_filter == Label::kPositive ? std::move(both->positive)
                                              : std::move(both->negative);
    }
  }
  return absl::InternalError("unknown regime");
}

absl::StatusOr<ClassHierarchies> BuildClassHierarchies(
    absl::Span<const ClientShard> shards, const PrivacySpec& spec,
    uint64_t seed) {
  if (spec.regime() == Regime::kLocalDp && !shards.empty()) {
    absl::StatusOr<int64_t> leaves = CheckedLeafCount(spec);
    if (!leaves.ok()) return leaves.status();
    if (absl::Status s = ValidateShards(shards); !s.ok()) return s;
    return BuildLocalDp(shards, spec, seed, *leaves, std::nullopt);
  }
  absl::StatusOr<HierarchicalCounts> pos =
      BuildHierarchy(shards, Label::kPositive, spec, seed);
  if (!pos.ok()) return pos.status();
  absl::StatusOr<HierarchicalCounts> neg =
      BuildHierarchy(shards, Label::kNegative, spec, seed);
  if (!neg.ok()) return neg.status();
  return ClassHierarchies{*std::move(pos), *std::move(neg)};
}

absl::StatusOr<NoisyCount> PrefixCount(const HierarchicalCounts& counts,
                                       int64_t r) {
  return RangeCount(counts, 0, r);
}

absl::StatusOr<NoisyCount> RangeCount(const HierarchicalCounts& counts,
                                      int64_t a, int64_t b) {
  if (a < 0 || b > counts.num_leaves() || a > b) {
    return absl::OutOfRangeError(absl::StrFormat(
        "range [%d, %d) is not within [0, %d]", a, b, counts.num_leaves()));
  }
  NoisyCount result;
  int64_t width = counts.num_leaves();
  for (int k = 1; k <= counts.height(); ++k) {
    width /= counts.fanout();
    auto [blo, bhi] = PrefixNodes(counts.fanout(), k, width, b);
    auto [alo, ahi] = PrefixNodes(counts.fanout(), k, width, a);
    const int64_t shared_lo = std::max(alo, blo);
    const int64_t shared_hi = std::max(shared_lo, std::min(ahi, bhi));
    absl::Span<const NoisyCount> level = counts.level(k);
    for (int64_t i = blo; i < bhi; ++i) {
      if (i >= shared_lo && i < shared_hi) continue;
      result.value += level[i].value;
      result.variance += level[i].variance;
    }
    for (int64_t i = alo; i < ahi; ++i) {
      if (i >= shared_lo && i < shared_hi) continue;
      result.value -= level[i].value;
      result.variance += level[i].variance;
    }
  }
  return result;
}

int64_t FindQuantileLeaf(const HierarchicalCounts& counts, double target_rank) {
  const double total = counts.population_total().value;
  const double target = std::clamp(target_rank, 0.0, std::max(total, 0.0));
  int64_t lo = 0;
  int64_t hi = counts.num_leaves();
  while (lo < hi) {
    const int64_t mid = lo + (hi - lo) / 2;
    if (PrefixValue(counts, mid) >= target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

double FindQuantile(const HierarchicalCounts& counts, double target_rank) {
  return static_cast<double>(FindQuantileLeaf(counts, target_rank)) /
         static_cast<double>(counts.num_leaves());
}

ScoreHistogram::ScoreHistogram(std::vector<double> boundaries,
                               std::vector<NoisyCount> positive,
                               std::vector<NoisyCount> negative,
                               double leaf_width, Regime regime)
    : boundaries_(std::move(boundaries)),
      positive_(std::move(positive)),
      negative_(std::move(negative)),
      leaf_width_(leaf_width),
      regime_(regime) {
  for (const NoisyCount& c : positive_) positive_total_ += c;
  for (const NoisyCount& c : negative_) negative_total_ += c;
}

absl::StatusOr<ScoreHistogram> ScoreHistogram::Create(
    std::vector<double> boundaries, std::vector<NoisyCount> positive,
    std::vector<NoisyCount> negative, double leaf_width, Regime regime) {
  if (positive.empty() || positive.size() != negative.size() ||
      boundaries.size() != positive.size() + 1) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "need B >= 1 buckets with B + 1 boundaries; got %d boundaries, %d "
        "positive and %d negative counts",
        boundaries.size(), positive.size(), negative.size()));
  }
  if (boundaries.front() != 0.0 || boundaries.back() != 1.0) {
    return absl::InvalidArgumentError("boundaries must start at 0 and end at 1");
  }
  for (size_t i = 1; i < boundaries.size(); ++i) {
    if (!(boundaries[i] > boundaries[i - 1])) {
      return absl::InvalidArgumentError(
          absl::StrFormat("boundaries not strictly increasing at %d", i));
    }
  }
  if (!(leaf_width >= 0.0)) {
    return absl::InvalidArgumentError("leaf width must be >= 0");
  }
  return ScoreHistogram(std::move(boundaries), std::move(positive),
                        std::move(negative), leaf_width, regime);
}

absl::StatusOr<std::vector<int64_t>> QuantileLeafBoundaries(
    const HierarchicalCounts& combined, int num_buckets,
    const HistogramOptions& options) {
  if (num_buckets < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("bucket count must be >= 1, got %d", num_buckets));
  }
  const int64_t leaves = combined.num_leaves();
  const double total = combined.population_total().value;
  std::vector<int64_t> cuts;
  cuts.reserve(num_buckets + 1);
  for (int j = 1; j < num_buckets; ++j) {
    const double target = total * static_cast<double>(j) / num_buckets;
    cuts.push_back(FindQuantileLeaf(combined, target));
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::erase_if(cuts, [&](int64_t r) { return r <= 0 || r >= leaves; });

  std::vector<int64_t> bounds = {0};
  int64_t cap = leaves;
  if (options.width_cap_slack.has_value()) {
    // cap = f^(h - ceil(log_f B) + slack), clamped to [1, leaves].
    int depth = 0;
    for (int64_t span = 1; span < num_buckets; span *= combined.fanout()) ++depth;
    const int exponent = combined.height() - depth + *options.width_cap_slack;
    cap = exponent <= 0 ? 1
                        : (exponent >= combined.height()
                               ? leaves
                               : LeafCount(combined.fanout(), exponent));
  }
  cuts.push_back(leaves);
  for (int64_t next : cuts) {
    int64_t start = bounds.back();
    while (next - start > cap) {
      start = (start / cap + 1) * cap;
      if (start < next) bounds.push_back(start);
    }
    bounds.push_back(next);
  }
  return bounds;
}

absl::StatusOr<ScoreHistogram> HistogramFromLeafBoundaries(
    const HierarchicalCounts& positive, const HierarchicalCounts& negative,
    absl::Span<const int64_t> leaf_boundaries) {
  if (positive.height() != negative.height() ||
      positive.fanout() != negative.fanout()) {
    return absl::InvalidArgumentError("class hierarchies differ in shape");
  }
  const int64_t leaves = positive.num_leaves();
  if (leaf_boundaries.size() < 2 || leaf_boundaries.front() != 0 ||
      leaf_boundaries.back() != leaves) {
    return absl::InvalidArgumentError(
        absl::StrFormat("leaf boundaries must run from 0 to %d", leaves));
  }
  std::vector<double> bounds;
  std::vector<NoisyCount> pos;
  std::vector<NoisyCount> neg;
  bounds.push_back(0.0);
  for (size_t j = 1; j < leaf_boundaries.size(); ++j) {
    const int64_t a = leaf_boundaries[j - 1];
    const int64_t b = leaf_boundaries[j];
    if (b <= a) {
      return absl::InvalidArgumentError(
          absl::StrFormat("leaf boundaries not increasing at %d", j));
    }
    absl::StatusOr<NoisyCount> p = RangeCount(positive, a, b);
    if (!p.ok()) return p.status();
    absl::StatusOr<NoisyCount> n = RangeCount(negative, a, b);
    if (!n.ok()) return n.status();
    pos.push_back(*p);
    neg.push_back(*n);
    bounds.push_back(static_cast<double>(b) / static_cast<double>(leaves));
  }
  return ScoreHistogram::Create(std::move(bounds), std::move(pos),
                                std::move(neg),
                                1.0 / static_cast<double>(leaves),
                                positive.spec().regime());
}

absl::StatusOr<ScoreHistogram> BuildScoreHistogram(
    const HierarchicalCounts& positive, const HierarchicalCounts& negative,
    int num_buckets, const HistogramOptions& options) {
  absl::StatusOr<HierarchicalCounts> combined =
      HierarchicalCounts::Sum(positive, negative);
  if (!combined.ok()) return combined.status();
  absl::StatusOr<std::vector<int64_t>> bounds =
      QuantileLeafBoundaries(*combined, num_buckets, options);
  if (!bounds.ok()) return bounds.status();
  return HistogramFromLeafBoundaries(positive, negative, *bounds);
}

}  // namespace fedcal
