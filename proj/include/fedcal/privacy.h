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

// Aggregation mechanisms for the three trust models: exact secure summation,
// distributed discrete-Laplace noise built from per-client Polya shares, and
// the Optimized Unary Encoding (OUE) local-DP frequency oracle.

#ifndef FEDCAL_PRIVACY_H_
#define FEDCAL_PRIVACY_H_

#include <cstdint>
#include <optional>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "fedcal/random.h"
#include "fedcal/types.h"

namespace fedcal {

// Elementwise sum of equal-length client reports. The result does not depend
// on report order. An empty report list sums to an empty vector.
absl::StatusOr<std::vector<int64_t>> SecureAggregate(
    absl::Span<const std::vector<int64_t>> reports);

// Parameters of one client's distributed noise share. Each share is the
// difference of two Polya(r, alpha) draws; with r = 1/M over M clients the
// aggregate is discrete Laplace with parameter alpha = exp(-epsilon / delta).
class PolyaShareParams {
 public:
  static absl::StatusOr<PolyaShareParams> Create(double r, double alpha,
                                                 int sensitivity = 1);
  // Shares for `num_clients` clients whose sum gives an epsilon-DP discrete
  // Laplace release of a count with the given L1 sensitivity.
  static absl::StatusOr<PolyaShareParams> ForClients(int64_t num_clients,
                                                     double epsilon,
                                                     int sensitivity = 1);

  double r() const { return r_; }
  double alpha() const { return alpha_; }
  int sensitivity() const { return sensitivity_; }

 private:
  PolyaShareParams(double r, double alpha, int sensitivity)
      : r_(r), alpha_(alpha), sensitivity_(sensitivity) {}

  double r_;
  double alpha_;
  int sensitivity_;
};

// One draw from the Polya (real-shape negative binomial) distribution with
// shape r > 0 and parameter alpha in (0, 1): a Poisson draw whose rate is
// Gamma(r, alpha / (1 - alpha)). Mean r*alpha/(1-alpha), variance
// r*alpha/(1-alpha)^2.
absl::StatusOr<int64_t> SamplePolya(double r, double alpha, Rng& rng);

// X - Y for independent Polya(r, alpha) draws X and Y.
int64_t DistDpNoiseShare(const PolyaShareParams& params, Rng& rng);

// Discrete Laplace (two-sided geometric) distribution with pmf proportional
// to alpha^|k|.
double DiscreteLaplacePmf(int64_t k, double alpha);
double DiscreteLaplaceVariance(double alpha);

class OueParams {
 public:
  static absl::StatusOr<OueParams> Create(double epsilon, int64_t domain_size);

  double epsilon() const { return epsilon_; }
  int64_t domain_size() const { return domain_size_; }
  // A set bit survives with probability 1/2.
  double p_keep() const { return 0.5; }
  // An unset bit flips on with probability 1/(e^epsilon + 1).
  double q_flip() const { return q_flip_; }
  // Variance of one decoded count per contributing report.
  double variance_per_report() const;

 private:
  OueParams(double epsilon, int64_t domain_size, double q_flip)
      : epsilon_(epsilon), domain_size_(domain_size), q_flip_(q_flip) {}

  double epsilon_;
  int64_t domain_size_;
  double q_flip_;
};

// Perturbs the one-hot encoding of `value` (or the all-zeros vector when
// `value` is empty) bit by bit.
absl::StatusOr<std::vector<uint8_t>> OueEncode(std::optional<int64_t> value,
                                               const OueParams& params,
                                               Rng& rng);

// Unbiased per-index estimates from a batch of OUE reports.
absl::StatusOr<std::vector<NoisyCount>> OueAggregate(
    absl::Span<const std::vector<uint8_t>> reports, const OueParams& params);

// Decoding step shared by the per-client and pooled paths:
// (bit_sum - n*q) / (p - q), advertised variance n*q*(1-q)/(p-q)^2.
std::vector<NoisyCount> OueDecode(absl::Span<const int64_t> bit_sums,
                                  int64_t num_reports,
                                  const OueParams& params);

// Draws the column sums of `num_reports` OUE reports directly: index v
// receives Binomial(true_counts[v], p) + Binomial(num_reports - true_counts[v],
// q). Same distribution as summing individually encoded reports.
std::vector<int64_t> OueSamplePooledBitSums(absl::Span<const int64_t> true_counts,
                                            int64_t num_reports,
                                            const OueParams& params, Rng& rng);

}  // namespace fedcal

#endif  // FEDCAL_PRIVACY_H_
