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

#include "fedcal/oracle.h"

#include <algorithm>
#include <cstdint>
#include <vector>

#include "absl/status/status.h"
#include "fedcal/calibration.h"

namespace fedcal {

absl::StatusOr<ExactAucResult> ExactAuc(
    absl::Span<const LabeledScore> examples) {
  std::vector<LabeledScore> sorted(examples.begin(), examples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore& a, const LabeledScore& b) {
              return a.score < b.score;
            });
  // Pair counts are integers; half-ties are tracked as doubled counts.
  int64_t negatives_below = 0;
  int64_t strict_pairs = 0;
  int64_t tied_pairs = 0;
  int64_t positives = 0;
  for (size_t i = 0; i < sorted.size();) {
    size_t j = i;
    int64_t group_pos = 0;
    int64_t group_neg = 0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      if (sorted[j].label == Label::kPositive) {
        ++group_pos;
      } else {
        ++group_neg;
      }
      ++j;
    }
    strict_pairs += group_pos * negatives_below;
    tied_pairs += group_pos * group_neg;
    negatives_below += group_neg;
    positives += group_pos;
    i = j;
  }
  if (positives == 0 || negatives_below == 0) {
    return absl::InvalidArgumentError(
        "AUC needs at least one positive and one negative example");
  }
  const double pairs =
      static_cast<double>(positives) * static_cast<double>(negatives_below);
  ExactAucResult out;
  out.strict = static_cast<double>(strict_pairs) / pairs;
  out.half_ties = static_cast<double>(2 * strict_pairs + tied_pairs) /
                  (2.0 * pairs);
  return out;
}

absl::StatusOr<ExactPraResult> ExactPra(absl::Span<const LabeledScore> examples,
                                        double threshold) {
  if (examples.empty()) {
    return absl::InvalidArgumentError("precision/recall of an empty set");
  }
  int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const LabeledScore& ex : examples) {
    const bool predicted = ex.score > threshold;
    if (ex.label == Label::kPositive) {
      ++(predicted ? tp : fn);
    } else {
      ++(predicted ? fp : tn);
    }
  }
  ExactPraResult out;
  if (tp + fp > 0) out.precision = static_cast<double>(tp) / (tp + fp);
  if (tp + fn > 0) out.recall = static_cast<double>(tp) / (tp + fn);
  out.accuracy = static_cast<double>(tp + tn) / examples.size();
  return out;
}

absl::StatusOr<ExactMetrics> ComputeExactMetrics(
    absl::Span<const LabeledScore> examples, double threshold, int ece_bins) {
  absl::StatusOr<ExactAucResult> auc = ExactAuc(examples);
  if (!auc.ok()) return auc.status();
  absl::StatusOr<ExactPraResult> pra = ExactPra(examples, threshold);
  if (!pra.ok()) return pra.status();
  absl::StatusOr<EceReport> ece = Ece(examples, ece_bins);
  if (!ece.ok()) return ece.status();
  ExactMetrics out;
  out.auc_strict = auc->strict;
  out.auc_half_ties = auc->half_ties;
  out.pra = *pra;
  out.ece = ece->ece;
  return out;
}

}  // namespace fedcal
