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

// Exact centralized metrics used as ground truth.

#ifndef FEDCAL_ORACLE_H_
#define FEDCAL_ORACLE_H_

#include <optional>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "fedcal/types.h"

namespace fedcal {

struct ExactAucResult {
  // Fraction of (positive, negative) pairs with the positive scored strictly
  // higher.
  double strict = 0.0;
  // Same, with tied pairs counted as 1/2.
  double half_ties = 0.0;
};

// O(M log M) by sorting. Fails unless both classes are present.
absl::StatusOr<ExactAucResult> ExactAuc(absl::Span<const LabeledScore> examples);

// Metrics of the rule score > T; absent when the denominator is zero.
struct ExactPraResult {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
};

absl::StatusOr<ExactPraResult> ExactPra(absl::Span<const LabeledScore> examples,
                                        double threshold);

struct ExactMetrics {
  double auc_strict = 0.0;
  double auc_half_ties = 0.0;
  ExactPraResult pra;
  // ECE of the raw scores read as probabilities.
  double ece = 0.0;
};

absl::StatusOr<ExactMetrics> ComputeExactMetrics(
    absl::Span<const LabeledScore> examples, double threshold, int ece_bins);

}  // namespace fedcal

#endif  // FEDCAL_ORACLE_H_
