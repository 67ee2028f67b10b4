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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "absl/status/status.h"
#include "fedcal/privacy.h"
#include "fedcal/random.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedcal {
namespace {

using ::testing::ElementsAre;

TEST(SecureAggregateTest, SumsElementwiseInAnyOrder) {
  std::vector<std::vector<int64_t>> reports = {{1, 0, 2}, {0, 3, 1}, {5, 5, 5}};
  absl::StatusOr<std::vector<int64_t>> sum = SecureAggregate(reports);
  ASSERT_TRUE(sum.ok());
  EXPECT_THAT(*sum, ElementsAre(6, 8, 8));
  std::sort(reports.begin(), reports.end());
  do {
    EXPECT_EQ(*SecureAggregate(reports), *sum);
  } while (std::next_permutation(reports.begin(), reports.end()));
}

TEST(SecureAggregateTest, EmptyAndMismatched) {
  EXPECT_TRUE(SecureAggregate({})->empty());
  std::vector<std::vector<int64_t>> bad = {{1, 2}, {1}};
  EXPECT_EQ(SecureAggregate(bad).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(PolyaTest, RejectsBadParameters) {
  Rng rng(1);
  EXPECT_FALSE(SamplePolya(0.0, 0.5, rng).ok());
  EXPECT_FALSE(SamplePolya(1.0, 1.0, rng).ok());
  EXPECT_FALSE(PolyaShareParams::ForClients(0, 1.0).ok());
  EXPECT_FALSE(PolyaShareParams::ForClients(10, 0.0).ok());
}

TEST(PolyaTest, ShareParametersForClients) {
  absl::StatusOr<PolyaShareParams> p = PolyaShareParams::ForClients(1000, 1.0, 4);
  ASSERT_TRUE(p.ok());
  EXPECT_DOUBLE_EQ(p->r(), 1e-3);
  EXPECT_DOUBLE_EQ(p->alpha(), std::exp(-0.25));
}

TEST(PolyaTest, MomentsMatchNegativeBinomial) {
  Rng rng(11);
  const double r = 2.5;
  const double alpha = 0.4;
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(*SamplePolya(r, alpha, rng));
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  const double want_mean = r * alpha / (1 - alpha);
  const double want_var = r * alpha / ((1 - alpha) * (1 - alpha));
  EXPECT_NEAR(mean, want_mean, 4 * std::sqrt(want_var / n));
  EXPECT_NEAR(var / want_var, 1.0, 0.03);
}

TEST(DiscreteLaplaceTest, PmfSumsToOneAndMatchesVariance) {
  const double alpha = std::exp(-1.0);
  double total = 0.0, var = 0.0;
  for (int k = -200; k <= 200; ++k) {
    total += DiscreteLaplacePmf(k, alpha);
    var += k * k * DiscreteLaplacePmf(k, alpha);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(var, DiscreteLaplaceVariance(alpha), 1e-9);
  EXPECT_DOUBLE_EQ(DiscreteLaplaceVariance(alpha),
                   2 * alpha / ((1 - alpha) * (1 - alpha)));
}

// Sum of 1000 shares against the discrete Laplace pmf.
TEST(DistDpNoiseTest, SummedSharesAreDiscreteLaplace) {
  const int clients = 1000;
  const int draws = 3000;
  absl::StatusOr<PolyaShareParams> p = PolyaShareParams::ForClients(clients, 1.0);
  ASSERT_TRUE(p.ok());
  Rng rng(1);
  std::map<int64_t, double> hist;
  for (int d = 0; d < draws; ++d) {
    int64_t total = 0;
    for (int c = 0; c < clients; ++c) total += DistDpNoiseShare(*p, rng);
    hist[total] += 1.0;
  }
  std::vector<double> observed, expected;
  for (int64_t k = -40; k <= 40; ++k) {
    observed.push_back(hist.count(k) ? hist[k] : 0.0);
    expected.push_back(draws * DiscreteLaplacePmf(k, p->alpha()));
  }
  auto [stat, dof] = testing::ChiSquare(observed, expected);
  EXPECT_LT(stat, testing::ChiSquareCritical(dof, 0.01));
}

TEST(OueTest, ParametersForLn3) {
  absl::StatusOr<OueParams> p = OueParams::Create(std::log(3.0), 4);
  ASSERT_TRUE(p.ok());
  EXPECT_DOUBLE_EQ(p->p_keep(), 0.5);
  EXPECT_NEAR(p->q_flip(), 0.25, 1e-15);
  EXPECT_FALSE(OueParams::Create(0.0, 4).ok());
  EXPECT_FALSE(OueParams::Create(1.0, 0).ok());
}

TEST(OueTest, DecodeClosedForm) {
  absl::StatusOr<OueParams> p = OueParams::Create(std::log(3.0), 2);
  ASSERT_TRUE(p.ok());
  const int64_t m = 1000;
  std::vector<int64_t> sums = {250, 400};
  std::vector<NoisyCount> out = OueDecode(sums, m, *p);
  EXPECT_NEAR(out[0].value, 0.0, 1e-9);
  EXPECT_NEAR(out[1].value, 4.0 * (400 - 0.25 * m), 1e-9);
  EXPECT_NEAR(out[0].variance, m * 0.25 * 0.75 / (0.25 * 0.25), 1e-9);
}

TEST(OueTest, EncodeRejectsOutOfRange) {
  absl::StatusOr<OueParams> p = OueParams::Create(1.0, 3);
  Rng rng(1);
  EXPECT_FALSE(OueEncode(3, *p, rng).ok());
  EXPECT_FALSE(OueEncode(-1, *p, rng).ok());
  EXPECT_EQ(OueEncode(std::nullopt, *p, rng)->size(), 3u);
}

TEST(OueTest, AggregateRejectsLengthMismatch) {
  absl::StatusOr<OueParams> p = OueParams::Create(1.0, 3);
  std::vector<std::vector<uint8_t>> reports = {{0, 1, 0}, {1, 0}};
  EXPECT_FALSE(OueAggregate(reports, *p).ok());
}

TEST(OueTest, NoneBitsFlipWithQ) {
  absl::StatusOr<OueParams> p = OueParams::Create(1.0, 8);
  Rng rng(3);
  const int n = 10000;
  double ones = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<uint8_t> bits = *OueEncode(std::nullopt, *p, rng);
    for (uint8_t b : bits) ones += b;
  }
  const double trials = 8.0 * n;
  const double q = p->q_flip();
  EXPECT_NEAR(ones / trials, q, 3 * std::sqrt(q * (1 - q) / trials));
}

TEST(OueTest, AggregateIsUnbiased) {
  absl::StatusOr<OueParams> p = OueParams::Create(1.0, 2);
  ASSERT_TRUE(p.ok());
  const int m = 10000;
  const int trials = 200;
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = MakeRng(99, {static_cast<uint64_t>(t)});
    std::vector<std::vector<uint8_t>> reports;
    reports.reserve(m);
    for (int i = 0; i < m; ++i) {
      reports.push_back(*OueEncode(i < 100 ? 0 : 1, *p, rng));
    }
    sum += (*OueAggregate(reports, *p))[0].value;
  }
  const double se =
      std::sqrt(m * p->q_flip() * (1 - p->q_flip()) /
                std::pow(p->p_keep() - p->q_flip(), 2) / trials);
  EXPECT_NEAR(sum / trials, 100.0, 3 * se);
}

TEST(OueTest, PooledBitSumsMatchPerReportMoments) {
  absl::StatusOr<OueParams> p = OueParams::Create(2.0, 3);
  std::vector<int64_t> truth = {50, 0, 30};
  const int64_t m = 100;
  const int trials = 4000;
  Rng rng(8);
  std::vector<double> mean(3, 0.0);
  for (int t = 0; t < trials; ++t) {
    std::vector<int64_t> sums = OueSamplePooledBitSums(truth, m, *p, rng);
    for (int v = 0; v < 3; ++v) mean[v] += static_cast<double>(sums[v]) / trials;
  }
  for (int v = 0; v < 3; ++v) {
    const double want = truth[v] * 0.5 + (m - truth[v]) * p->q_flip();
    EXPECT_NEAR(mean[v], want, 0.3) << v;
  }
}

// Root-mean-square decode error grows like sqrt(M).
TEST(OueTest, ErrorScalesWithSqrtM) {
  absl::StatusOr<OueParams> p = OueParams::Create(1.0, 2);
  std::vector<double> ms = {1e3, 1e4, 1e5};
  std::vector<double> errors;
  Rng rng(5);
  for (double m : ms) {
    const int64_t n = static_cast<int64_t>(m);
    std::vector<int64_t> truth = {n / 10, n - n / 10};
    double sq = 0.0;
    const int trials = 300;
    for (int t = 0; t < trials; ++t) {
      std::vector<NoisyCount> est =
          OueDecode(OueSamplePooledBitSums(truth, n, *p, rng), n, *p);
      sq += std::pow(est[0].value - truth[0], 2);
    }
    errors.push_back(std::sqrt(sq / trials));
  }
  EXPECT_NEAR(testing::LogLogSlope(ms, errors), 0.5, 0.15);
}

}  // namespace
}  // namespace fedcal
