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

#ifndef FEDCAL_TYPES_H_
#define FEDCAL_TYPES_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace fedcal {

// Ground-truth class of an example. In the ±1 notation commonly used for the
// AUC rank statistic, kPositive corresponds to +1 and kNegative to -1.
enum class Label : uint8_t { kNegative = 0, kPositive = 1 };

// One classifier output together with its label. Scores live in [0, 1].
struct LabeledScore {
  double score = 0.0;
  Label label = Label::kNegative;

  bool operator==(const LabeledScore&) const = default;
};

// Returns `example` unchanged when its score is a finite value in [0, 1].
absl::StatusOr<LabeledScore> Validate(const LabeledScore& example);

// The examples held by a single client. Empty shards are legal: such clients
// still take part in every aggregation round with an all-zero report.
struct ClientShard {
  std::vector<LabeledScore> examples;
};

enum class Regime : uint8_t { kSecureAgg, kDistDp, kLocalDp };

absl::string_view RegimeName(Regime regime);
absl::StatusOr<Regime> ParseRegime(absl::string_view name);

// How client-side randomness is simulated. kPerClient draws every client's
// report or noise share explicitly. kPooled draws the aggregate directly from
// its exact distribution (sums of Polya shares are Polya, sums of OUE bits are
// binomial), which is indistinguishable in distribution and O(domain) in cost.
enum class NoiseSimulation : uint8_t { kPooled, kPerClient };

// Which privacy regime is active for an aggregation, with its parameters.
class PrivacySpec {
 public:
  // `epsilon` is ignored (and may be absent) for kSecureAgg; it must be > 0
  // otherwise. Height must be >= 1 and fanout >= 2.
  static absl::StatusOr<PrivacySpec> Create(
      Regime regime, std::optional<double> epsilon, int height, int fanout = 2,
      NoiseSimulation simulation = NoiseSimulation::kPooled);

  static PrivacySpec SecureAgg(int height, int fanout = 2);

  Regime regime() const { return regime_; }
  // Zero for kSecureAgg.
  double epsilon() const { return epsilon_; }
  std::optional<double> maybe_epsilon() const;
  int height() const { return height_; }
  int fanout() const { return fanout_; }
  NoiseSimulation simulation() const { return simulation_; }

  // Copy with a different height; epsilon and regime are kept.
  PrivacySpec WithHeight(int height) const;

  bool operator==(const PrivacySpec&) const = default;

 private:
  PrivacySpec(Regime regime, double epsilon, int height, int fanout,
              NoiseSimulation simulation)
      : regime_(regime),
        epsilon_(epsilon),
        height_(height),
        fanout_(fanout),
        simulation_(simulation) {}

  Regime regime_;
  double epsilon_;
  int height_;
  int fanout_;
  NoiseSimulation simulation_;
};

// A point mass in a score distribution. Masses are fractions of their class.
struct Spike {
  double location = 0.0;
  double positive_mass = 0.0;
  double negative_mass = 0.0;
};

// Parameters of a (phi, l)-well-behaved score distribution: Lipschitz
// between a finite set of spikes.
struct WellBehavedSpec {
  std::vector<Spike> spikes;
  double lipschitz = 0.0;
  double spike_threshold = 0.01;
};

absl::Status ValidateWellBehavedSpec(const WellBehavedSpec& spec);

// A count released by an aggregation mechanism. `value` may be negative or
// fractional under noise; `variance` is the mechanism's advertised variance
// and is zero exactly when no noise was added.
struct NoisyCount {
  double value = 0.0;
  double variance = 0.0;

  NoisyCount& operator+=(const NoisyCount& other) {
    value += other.value;
    variance += other.variance;
    return *this;
  }
  friend NoisyCount operator+(NoisyCount a, const NoisyCount& b) {
    return a += b;
  }
  bool operator==(const NoisyCount&) const = default;
};

}  // namespace fedcal

#endif  // FEDCAL_TYPES_H_
