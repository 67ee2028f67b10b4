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

#include "fedcal/calibration.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace fedcal {
namespace {

// Bucket of `score` under the right-closed convention.
size_t BucketOf(absl::Span<const double> boundaries, double score) {
  const size_t buckets = boundaries.size() - 1;
  const size_t upper =
      std::lower_bound(boundaries.begin() + 1, boundaries.end(), score) -
      (boundaries.begin() + 1);
  return std::min(upper, buckets - 1);
}

// Beta-binomial log marginal likelihood of one binning.
double BinningLogScore(const ScoreHistogram& hist, double sample_size) {
  const int buckets = hist.num_buckets();
  const double strength = sample_size / buckets;
  double score = 0.0;
  for (int b = 0; b < buckets; ++b) {
    const double pos = std::max(hist.positive_counts()[b].value, 0.0);
    const double neg = std::max(hist.negative_counts()[b].value, 0.0);
    const double mid = 0.5 * (hist.boundaries()[b] + hist.boundaries()[b + 1]);
    const double a = mid * strength;
    const double c = (1.0 - mid) * strength;
    score += std::lgamma(strength) - std::lgamma(pos + neg + strength) +
             std::lgamma(pos + a) - std::lgamma(a) + std::lgamma(neg + c) -
             std::lgamma(c);
  }
  return score;
}

// Histogram of `buckets` cells whose boundaries come from `boundary_source`.
absl::StatusOr<ScoreHistogram> CandidateHistogram(
    const HierarchicalCounts& boundary_source,
    const HierarchicalCounts& positive, const HierarchicalCounts& negative,
    int buckets, const HistogramOptions& options) {
  absl::StatusOr<std::vector<int64_t>> bounds =
      QuantileLeafBoundaries(boundary_source, buckets, options);
  if (!bounds.ok()) return bounds.status();
  return HistogramFromLeafBoundaries(positive, negative, *bounds);
}

}  // namespace

absl::StatusOr<CalibrationMap> CalibrationMap::Create(
    std::vector<Binning> binnings, std::vector<double> weights) {
  if (binnings.empty() || binnings.size() != weights.size()) {
    return absl::InvalidArgumentError(
        "need one weight per binning and at least one binning");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) {
      return absl::InvalidArgumentError("weights must be nonnegative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    return absl::InvalidArgumentError(
        absl::StrFormat("weights sum to %.17g, not 1", total));
  }
  for (const Binning& b : binnings) {
    if (b.boundaries.size() < 2 || b.values.size() + 1 != b.boundaries.size()) {
      return absl::InvalidArgumentError(
          "a binning needs B + 1 boundaries and B values");
    }
    if (b.boundaries.front() != 0.0 || b.boundaries.back() != 1.0 ||
        std::adjacent_find(b.boundaries.begin(), b.boundaries.end(),
                           std::greater_equal<double>()) !=
            b.boundaries.end()) {
      return absl::InvalidArgumentError(
          "binning boundaries must increase strictly from 0 to 1");
    }
    for (double v : b.values) {
      if (!(v >= 0.0 && v <= 1.0)) {
        return absl::InvalidArgumentError(
            absl::StrFormat("calibrated value %g outside [0, 1]", v));
      }
    }
  }
  return CalibrationMap(std::move(binnings), std::move(weights));
}

CalibrationMap CalibrateHistogram(const ScoreHistogram& hist,
                                  std::optional<double> prior) {
  const double pos_total = hist.positive_total().value;
  const double population = pos_total + hist.negative_total().value;
  double fallback = 0.5;
  if (prior.has_value()) {
    fallback = std::clamp(*prior, 0.0, 1.0);
  } else if (population > 0.0) {
    fallback = std::clamp(pos_total / population, 0.0, 1.0);
  }
  const double tau = 1e-9 * std::max(population, 0.0);
  Binning binning;
  binning.boundaries.assign(hist.boundaries().begin(), hist.boundaries().end());
  for (int i = 0; i < hist.num_buckets(); ++i) {
    const double p = std::max(hist.positive_counts()[i].value, 0.0);
    const double n = std::max(hist.negative_counts()[i].value, 0.0);
    binning.values.push_back(p + n <= tau ? fallback : p / (p + n));
  }
  std::vector<Binning> binnings;
  binnings.push_back(std::move(binning));
  return *CalibrationMap::Create(std::move(binnings), {1.0});
}

absl::StatusOr<std::vector<int>> BbqCandidateBuckets(double population,
                                                     int max_candidates) {
  if (!(population > 0.0) || !std::isfinite(population)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "population estimate must be positive, got %g", population));
  }
  if (max_candidates < 1) {
    return absl::InvalidArgumentError("need at least one candidate");
  }
  const double root = std::cbrt(population);
  const int lo = std::max(1, static_cast<int>(std::ceil(root / 10.0 - 1e-9)));
  const int hi = std::max(lo, static_cast<int>(std::floor(10.0 * root + 1e-9)));
  const int count = std::min(max_candidates, hi - lo + 1);
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    const int b = static_cast<int>(
        std::lround(lo * std::pow(static_cast<double>(hi) / lo, frac)));
    if (out.empty() || b > out.back()) out.push_back(b);
  }
  return out;
}

absl::StatusOr<std::vector<BbqCandidate>> BbqWeights(
    const HierarchicalCounts& positive, const HierarchicalCounts& negative,
    double population, const BbqOptions& options) {
  absl::StatusOr<std::vector<int>> sizes =
      BbqCandidateBuckets(population, options.max_candidates);
  if (!sizes.ok()) return sizes.status();
  absl::StatusOr<HierarchicalCounts> combined =
      options.boundary_source != nullptr
          ? absl::StatusOr<HierarchicalCounts>(*options.boundary_source)
          : HierarchicalCounts::Sum(positive, negative);
  if (!combined.ok()) return combined.status();
  std::vector<BbqCandidate> out;
  double best = -INFINITY;
  for (int b : *sizes) {
    absl::StatusOr<ScoreHistogram> hist = CandidateHistogram(
        *combined, positive, negative, b, options.histogram);
    if (!hist.ok()) return hist.status();
    BbqCandidate c;
    c.num_buckets = b;
    c.log_score = BinningLogScore(*hist, options.equivalent_sample_size);
    best = std::max(best, c.log_score);
    out.push_back(c);
  }
  double total = 0.0;
  for (BbqCandidate& c : out) {
    c.weight = std::exp(c.log_score - best);
    total += c.weight;
  }
  for (BbqCandidate& c : out) c.weight /= total;
  return out;
}

absl::StatusOr<CalibrationMap> BbqCalibrate(const HierarchicalCounts& positive,
                                            const HierarchicalCounts& negative,
                                            double population,
                                            const BbqOptions& options) {
  absl::StatusOr<std::vector<BbqCandidate>> candidates =
      BbqWeights(positive, negative, population, options);
  if (!candidates.ok()) return candidates.status();
  absl::StatusOr<HierarchicalCounts> combined =
      options.boundary_source != nullptr
          ? absl::StatusOr<HierarchicalCounts>(*options.boundary_source)
          : HierarchicalCounts::Sum(positive, negative);
  if (!combined.ok()) return combined.status();
  std::vector<Binning> binnings;
  std::vector<double> weights;
  for (const BbqCandidate& c : *candidates) {
    absl::StatusOr<ScoreHistogram> hist = CandidateHistogram(
        *combined, positive, negative, c.num_buckets, options.histogram);
    if (!hist.ok()) return hist.status();
    CalibrationMap single = CalibrateHistogram(*hist);
    binnings.push_back(single.binnings().front());
    weights.push_back(c.weight);
  }
  // Renormalize so rounding in the softmax cannot trip the sum check.
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= total;
  return CalibrationMap::Create(std::move(binnings), std::move(weights));
}

double ApplyCalibration(const CalibrationMap& map, double score) {
  double out = 0.0;
  for (size_t b = 0; b < map.binnings().size(); ++b) {
    const Binning& binning = map.binnings()[b];
    out += map.weights()[b] * binning.values[BucketOf(binning.boundaries, score)];
  }
  return std::clamp(out, 0.0, 1.0);
}

absl::StatusOr<EceReport> Ece(absl::Span<const LabeledScore> predictions,
                              int num_bins, EceBinning binning) {
  if (predictions.empty()) {
    return absl::InvalidArgumentError("ECE of an empty prediction list");
  }
  if (num_bins < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("bin count must be >= 1, got %d", num_bins));
  }
  const double k = static_cast<double>(num_bins);
  std::vector<int> bin_of(predictions.size());
  EceReport report;
  report.num_bins = num_bins;
  report.bins.resize(num_bins);
  if (binning == EceBinning::kEqualWidth) {
    for (size_t i = 0; i < predictions.size(); ++i) {
      const double x = predictions[i].score;
      int j = std::clamp(static_cast<int>(std::ceil(x * k)), 1, num_bins);
      while (j > 1 && x <= static_cast<double>(j - 1) / k) --j;
      while (j < num_bins && x > static_cast<double>(j) / k) ++j;
      bin_of[i] = j - 1;
    }
    for (int j = 0; j < num_bins; ++j) {
      report.bins[j].upper = static_cast<double>(j + 1) / k;
    }
  } else {
    std::vector<size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return predictions[a].score < predictions[b].score;
    });
    const size_t n = order.size();
    for (int j = 0; j < num_bins; ++j) {
      const size_t begin = j * n / num_bins;
      const size_t end = (j + 1) * n / num_bins;
      for (size_t r = begin; r < end; ++r) bin_of[order[r]] = j;
      report.bins[j].upper =
          end > begin ? predictions[order[end - 1]].score
                      : (j > 0 ? report.bins[j - 1].upper : 0.0);
    }
  }
  std::vector<double> positives(num_bins, 0.0);
  std::vector<double> score_sums(num_bins, 0.0);
  for (size_t i = 0; i < predictions.size(); ++i) {
    const int j = bin_of[i];
    ++report.bins[j].count;
    if (predictions[i].label == Label::kPositive) positives[j] += 1.0;
    score_sums[j] += predictions[i].score;
  }
  const double n = static_cast<double>(predictions.size());
  for (int j = 0; j < num_bins; ++j) {
    EceBin& bin = report.bins[j];
    if (bin.count == 0) continue;
    const double count = static_cast<double>(bin.count);
    bin.mass = count / n;
    bin.observed = positives[j] / count;
    bin.expected = score_sums[j] / count;
  }
  report.ece = EceFromBins(report);
  return report;
}

double EceFromBins(const EceReport& report) {
  double ece = 0.0;
  for (const EceBin& bin : report.bins) {
    if (bin.count == 0) continue;
    ece += bin.mass * std::abs(bin.observed - bin.expected);
  }
  return ece;
}

}  // namespace fedcal
