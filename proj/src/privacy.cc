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

#include "fedcal/privacy.h"

#include <cmath>
#include <random>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace fedcal {

absl::StatusOr<std::vector<int64_t>> SecureAggregate(
    absl::Span<const std::vector<int64_t>> reports) {
  if (reports.empty()) return std::vector<int64_t>();
  std::vector<int64_t> sum(reports.front().size(), 0);
  for (size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].size() != sum.size()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "report %d has length %d, expected %d", i, reports[i].size(),
          sum.size()));
    }
    for (size_t j = 0; j < sum.size(); ++j) sum[j] += reports[i][j];
  }
  return sum;
}

absl::StatusOr<PolyaShareParams> PolyaShareParams::Create(double r,
                                                          double alpha,
                                                          int sensitivity) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Polya shape r must be > 0, got %g", r));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("Polya alpha must lie in (0, 1), got %g", alpha));
  }
  if (sensitivity < 1) {
    return absl::InvalidArgumentError("sensitivity must be a positive integer");
  }
  return PolyaShareParams(r, alpha, sensitivity);
}

absl::StatusOr<PolyaShareParams> PolyaShareParams::ForClients(
    int64_t num_clients, double epsilon, int sensitivity) {
  if (num_clients < 1) {
    return absl::InvalidArgumentError("need at least one client");
  }
  if (!(epsilon > 0.0) || sensitivity < 1) {
    return absl::InvalidArgumentError("epsilon and sensitivity must be > 0");
  }
  return Create(1.0 / static_cast<double>(num_clients),
                std::exp(-epsilon / sensitivity), sensitivity);
}

absl::StatusOr<int64_t> SamplePolya(double r, double alpha, Rng& rng) {
  if (!(r > 0.0) || !std::isfinite(r) || !(alpha > 0.0 && alpha < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("invalid Polya parameters r=%g alpha=%g", r, alpha));
  }
  std::gamma_distribution<double> gamma(r, alpha / (1.0 - alpha));
  const double rate = gamma(rng);
  if (!(rate > 0.0)) return 0;
  std::poisson_distribution<int64_t> poisson(rate);
  return poisson(rng);
}

int64_t DistDpNoiseShare(const PolyaShareParams& params, Rng& rng) {
  // Parameters were validated at construction.
  const int64_t x = *SamplePolya(params.r(), params.alpha(), rng);
  const int64_t y = *SamplePolya(params.r(), params.alpha(), rng);
  return x - y;
}

double DiscreteLaplacePmf(int64_t k, double alpha) {
  return (1.0 - alpha) / (1.0 + alpha) *
         std::pow(alpha, static_cast<double>(k < 0 ? -k : k));
}

double DiscreteLaplaceVariance(double alpha) {
  return 2.0 * alpha / ((1.0 - alpha) * (1.0 - alpha));
}

absl::StatusOr<OueParams> OueParams::Create(double epsilon,
                                            int64_t domain_size) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("OUE epsilon must be > 0, got %g", epsilon));
  }
  if (domain_size < 1) {
    return absl::InvalidArgumentError("OUE domain size must be >= 1");
  }
  return OueParams(epsilon, domain_size, 1.0 / (std::exp(epsilon) + 1.0));
}

double OueParams::variance_per_report() const {
  const double gap = p_keep() - q_flip_;
  return q_flip_ * (1.0 - q_flip_) / (gap * gap);
}

absl::StatusOr<std::vector<uint8_t>> OueEncode(std::optional<int64_t> value,
                                               const OueParams& params,
                                               Rng& rng) {
  const int64_t size = params.domain_size();
  if (value.has_value() && (*value < 0 || *value >= size)) {
    return absl::OutOfRangeError(absl::StrFormat(
        "OUE value %d outside domain [0, %d)", *value, size));
  }
  std::vector<uint8_t> bits(size);
  std::bernoulli_distribution keep(params.p_keep());
  std::bernoulli_distribution flip(params.q_flip());
  for (int64_t v = 0; v < size; ++v) {
    const bool set = value.has_value() && *value == v;
    bits[v] = set ? keep(rng) : flip(rng);
  }
  return bits;
}

std::vector<NoisyCount> OueDecode(absl::Span<const int64_t> bit_sums,
                                  int64_t num_reports,
                                  const OueParams& params) {
  const double q = params.q_flip();
  const double gap = params.p_keep() - q;
  const double variance =
      static_cast<double>(num_reports) * params.variance_per_report();
  std::vector<NoisyCount> out(bit_sums.size());
  for (size_t v = 0; v < bit_sums.size(); ++v) {
    out[v].value =
        (static_cast<double>(bit_sums[v]) - static_cast<double>(num_reports) * q) /
        gap;
    out[v].variance = variance;
  }
  return out;
}

absl::StatusOr<std::vector<NoisyCount>> OueAggregate(
    absl::Span<const std::vector<uint8_t>> reports, const OueParams& params) {
  std::vector<int64_t> sums(params.domain_size(), 0);
  for (size_t i = 0; i < reports.size(); ++i) {
    if (static_cast<int64_t>(reports[i].size()) != params.domain_size()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "OUE report %d has length %d, expected %d", i, reports[i].size(),
          params.domain_size()));
    }
    for (size_t v = 0; v < sums.size(); ++v) sums[v] += reports[i][v];
  }
  return OueDecode(sums, static_cast<int64_t>(reports.size()), params);
}

std::vector<int64_t> OueSamplePooledBitSums(absl::Span<const int64_t> true_counts,
                                            int64_t num_reports,
                                            const OueParams& params, Rng& rng) {
  std::vector<int64_t> sums(true_counts.size());
  for (size_t v = 0; v < true_counts.size(); ++v) {
    const int64_t holders = true_counts[v];
    int64_t kept = 0;
    int64_t flipped = 0;
    if (holders > 0) {
      kept = std::binomial_distribution<int64_t>(holders, params.p_keep())(rng);
    }
    if (num_reports - holders > 0) {
      flipped = std::binomial_distribution<int64_t>(num_reports - holders,
                                                    params.q_flip())(rng);
    }
    sums[v] = kept + flipped;
  }
  return sums;
}

}  // namespace fedcal
