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

#include "fedcal/types.h"

#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace fedcal {

absl::StatusOr<LabeledScore> Validate(const LabeledScore& example) {
  if (!(example.score >= 0.0 && example.score <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("score %g is outside [0, 1]", example.score));
  }
  return example;
}

absl::string_view RegimeName(Regime regime) {
  switch (regime) {
    case Regime::kSecureAgg:
      return "secure_agg";
    case Regime::kDistDp:
      return "dist_dp";
    case Regime::kLocalDp:
      return "local_dp";
  }
  return "unknown";
}

absl::StatusOr<Regime> ParseRegime(absl::string_view name) {
  if (name == "secure_agg" || name == "secagg" || name == "federated") {
    return Regime::kSecureAgg;
  }
  if (name == "dist_dp" || name == "distdp") return Regime::kDistDp;
  if (name == "local_dp" || name == "localdp") return Regime::kLocalDp;
  return absl::InvalidArgumentError(
      absl::StrFormat("unknown privacy regime '%s'", name));
}

absl::StatusOr<PrivacySpec> PrivacySpec::Create(Regime regime,
                                                std::optional<double> epsilon,
                                                int height, int fanout,
                                                NoiseSimulation simulation) {
  if (height < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("hierarchy height must be >= 1, got %d", height));
  }
  if (fanout < 2) {
    return absl::InvalidArgumentError(
        absl::StrFormat("fanout must be >= 2, got %d", fanout));
  }
  double eps = 0.0;
  if (regime != Regime::kSecureAgg) {
    if (!epsilon.has_value() || !(*epsilon > 0.0) || !std::isfinite(*epsilon)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "regime %s needs a finite epsilon > 0", RegimeName(regime)));
    }
    eps = *epsilon;
  }
  return PrivacySpec(regime, eps, height, fanout, simulation);
}

PrivacySpec PrivacySpec::SecureAgg(int height, int fanout) {
  return *Create(Regime::kSecureAgg, std::nullopt, height, fanout);
}

std::optional<double> PrivacySpec::maybe_epsilon() const {
  if (regime_ == Regime::kSecureAgg) return std::nullopt;
  return epsilon_;
}

PrivacySpec PrivacySpec::WithHeight(int height) const {
  PrivacySpec copy = *this;
  copy.height_ = height;
  return copy;
}

absl::Status ValidateWellBehavedSpec(const WellBehavedSpec& spec) {
  if (!(spec.lipschitz >= 0.0) || !std::isfinite(spec.lipschitz)) {
    return absl::InvalidArgumentError("lipschitz constant must be >= 0");
  }
  if (!(spec.spike_threshold > 0.0 && spec.spike_threshold <= 1.0)) {
    return absl::InvalidArgumentError("spike threshold must lie in (0, 1]");
  }
  double positive_total = 0.0;
  double negative_total = 0.0;
  for (const Spike& spike : spec.spikes) {
    if (!(spike.location >= 0.0 && spike.location <= 1.0)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "spike location %g is outside [0, 1]", spike.location));
    }
    if (!(spike.positive_mass >= 0.0) || !(spike.negative_mass >= 0.0)) {
      return absl::InvalidArgumentError("spike masses must be >= 0");
    }
    positive_total += spike.positive_mass;
    negative_total += spike.negative_mass;
  }
  if (positive_total > 1.0 || negative_total > 1.0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "spike mass exceeds 1 (positive %g, negative %g)", positive_total,
        negative_total));
  }
  return absl::OkStatus();
}

}  // namespace fedcal
