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
#include <vector>

#include "fedcal/hierarchy.h"
#include "fedcal/metrics.h"
#include "fedcal/oracle.h"
#include "fedcal/random.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedcal {
namespace {

using ::testing::ElementsAre;
using testing::RandomExamples;
using testing::Singletons;

NoisyCount C(double v) { return {v, 0.0}; }

ScoreHistogram Hist(std::vector<double> bounds, std::vector<double> pos,
                    std::vector<double> neg, double leaf_width = 0.0) {
  std::vector<NoisyCount> p, n;
  for (double v : pos) p.push_back(C(v));
  for (double v : neg) n.push_back(C(v));
  return *ScoreHistogram::Create(std::move(bounds), p, n, leaf_width);
}

ScoreHistogram FromExamples(const std::vector<LabeledScore>& xs,
                            const PrivacySpec& spec, int buckets,
                            uint64_t seed = 1,
                            const HistogramOptions& opts = {}) {
  std::vector<ClientShard> shards = Singletons(xs);
  ClassHierarchies h = *BuildClassHierarchies(shards, spec, seed);
  return *BuildScoreHistogram(h.positive, h.negative, buckets, opts);
}

std::vector<PredictionShard> Predictions(
    std::initializer_list<std::pair<bool, Label>> items) {
  std::vector<PredictionShard> out;
  for (const auto& [pred, label] : items) out.push_back({{{pred, label}}});
  return out;
}

// PraThreshold.

TEST(PraThresholdTest, SeparatedTwoBuckets) {
  ScoreHistogram h = Hist({0.0, 0.5, 1.0}, {0, 2}, {2, 0});
  PraEstimate e = *PraThreshold(h, 0.5);
  EXPECT_EQ(*e.precision, 1.0);
  EXPECT_EQ(*e.recall, 1.0);
  EXPECT_EQ(*e.accuracy, 1.0);
  EXPECT_EQ(e.effective_threshold, 0.5);
  EXPECT_EQ(e.threshold_slack, 0.0);
  EXPECT_TRUE(e.degenerate.empty());
}

TEST(PraThresholdTest, TopThresholdPredictsNothing) {
  ScoreHistogram h = Hist({0.0, 0.5, 1.0}, {1, 3}, {4, 2});
  PraEstimate e = *PraThreshold(h, 1.0);
  EXPECT_FALSE(e.precision.has_value());
  EXPECT_THAT(e.degenerate, ElementsAre("precision"));
  EXPECT_EQ(*e.recall, 0.0);
  EXPECT_EQ(*e.accuracy, 0.6);
}

TEST(PraThresholdTest, SnapsToNearestBoundaryWithTiesLow) {
  ScoreHistogram h = Hist({0.0, 0.5, 1.0}, {1, 3}, {4, 2}, 1.0 / 1024);
  PraEstimate tie = *PraThreshold(h, 0.25);
  EXPECT_EQ(tie.effective_threshold, 0.0);
  EXPECT_DOUBLE_EQ(tie.threshold_slack, 0.25 + 1.0 / 1024);
  EXPECT_EQ(PraThreshold(h, 0.26)->effective_threshold, 0.5);
  EXPECT_EQ(PraThreshold(h, 0.9)->effective_threshold, 1.0);
  // Everything is predicted positive at T' = 0.
  EXPECT_EQ(*tie.recall, 1.0);
  EXPECT_EQ(*tie.precision, 0.4);
}

TEST(PraThresholdTest, RejectsOutOfRangeThreshold) {
  ScoreHistogram h = Hist({0.0, 1.0}, {1}, {1});
  EXPECT_EQ(PraThreshold(h, -0.1).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(PraThreshold(h, 1.5).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(PraThreshold(h, std::nan("")).ok());
}

TEST(PraThresholdTest, ClampsNoisyCounters) {
  ScoreHistogram h = Hist({0.0, 0.5, 1.0}, {2, -1}, {-0.5, 3});
  PraEstimate e = *PraThreshold(h, 0.5);
  // TP = -1 is clamped to 0; predicted positives 2 > 0.
  EXPECT_EQ(*e.precision, 0.0);
  EXPECT_EQ(*e.recall, 0.0);
  ASSERT_TRUE(e.accuracy.has_value());
  EXPECT_GE(*e.accuracy, 0.0);
  EXPECT_LE(*e.accuracy, 1.0);
}

TEST(PraThresholdTest, AllDegenerateIsAnError) {
  ScoreHistogram h = Hist({0.0, 1.0}, {0}, {0});
  EXPECT_EQ(PraThreshold(h, 0.5).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

// Without noise the histogram estimate equals the exact metrics at the
// effective threshold, for every interior boundary. Leaf 0 also holds
// scores equal to 0, so T' = 0 is excluded.
TEST(PraThresholdTest, ExactAtBoundariesUnderSecureAggregation) {
  Rng rng(211);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<LabeledScore> xs = RandomExamples(500 + 97 * trial, rng,
                                                  trial % 2 ? 0 : 50);
    ScoreHistogram h = FromExamples(xs, PrivacySpec::SecureAgg(12), 20);
    for (double b : h.boundaries()) {
      if (b == 0.0) continue;
      PraEstimate e = *PraThreshold(h, b);
      ASSERT_EQ(e.effective_threshold, b);
      ExactPraResult exact = *ExactPra(xs, b);
      EXPECT_EQ(e.precision, exact.precision) << b;
      EXPECT_EQ(e.recall, exact.recall) << b;
      EXPECT_EQ(e.accuracy, exact.accuracy) << b;
    }
  }
}

// For an arbitrary T, the exact metric at T' is within the snapping error of
// the exact metric at T: check that T' lies in the slack window.
TEST(PraThresholdTest, EffectiveThresholdWithinSlack) {
  Rng rng(223);
  std::vector<LabeledScore> xs = RandomExamples(4000, rng);
  ScoreHistogram h = FromExamples(xs, PrivacySpec::SecureAgg(10), 16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double t = u(rng);
    PraEstimate e = *PraThreshold(h, t);
    EXPECT_LE(std::abs(e.effective_threshold - t), e.threshold_slack);
  }
}

TEST(PraThresholdTest, InvariantUnderClientSplit) {
  Rng rng(227);
  std::vector<LabeledScore> xs = RandomExamples(1000, rng);
  std::vector<ClientShard> one(1);
  one[0].examples = xs;
  std::vector<ClientShard> many = Singletons(xs);
  PrivacySpec spec = PrivacySpec::SecureAgg(10);
  ClassHierarchies a = *BuildClassHierarchies(one, spec, 1);
  ClassHierarchies b = *BuildClassHierarchies(many, spec, 2);
  ScoreHistogram ha = *BuildScoreHistogram(a.positive, a.negative, 10);
  ScoreHistogram hb = *BuildScoreHistogram(b.positive, b.negative, 10);
  PraEstimate ea = *PraThreshold(ha, 0.5);
  PraEstimate eb = *PraThreshold(hb, 0.5);
  EXPECT_EQ(ea.precision, eb.precision);
  EXPECT_EQ(ea.recall, eb.recall);
  EXPECT_EQ(ea.accuracy, eb.accuracy);
  EXPECT_EQ(AucHistogram(ha)->value, AucHistogram(hb)->value);
}

// PraFixed.

TEST(PraFixedTest, PerfectClassifier) {
  auto shards = Predictions({{true, Label::kPositive},
                             {true, Label::kPositive},
                             {false, Label::kNegative},
                             {false, Label::kNegative}});
  PraEstimate e = *PraFixed(shards, PrivacySpec::SecureAgg(1), 1);
  EXPECT_EQ(*e.precision, 1.0);
  EXPECT_EQ(*e.recall, 1.0);
  EXPECT_EQ(*e.accuracy, 1.0);
}

TEST(PraFixedTest, HalfRight) {
  auto shards = Predictions({{true, Label::kPositive},
                             {false, Label::kPositive},
                             {true, Label::kNegative},
                             {false, Label::kNegative}});
  PraEstimate e = *PraFixed(shards, PrivacySpec::SecureAgg(1), 1);
  EXPECT_EQ(*e.precision, 0.5);
  EXPECT_EQ(*e.recall, 0.5);
  EXPECT_EQ(*e.accuracy, 0.5);
  EXPECT_EQ(e.counters.total.value, 4.0);
}

TEST(PraFixedTest, NoPredictedPositivesIsDegeneratePrecision) {
  auto shards = Predictions({{false, Label::kPositive},
                             {false, Label::kNegative}});
  PraEstimate e = *PraFixed(shards, PrivacySpec::SecureAgg(1), 1);
  EXPECT_FALSE(e.precision.has_value());
  EXPECT_THAT(e.degenerate, ElementsAre("precision"));
  EXPECT_EQ(*e.recall, 0.0);
  EXPECT_EQ(*e.accuracy, 0.5);
}

TEST(PraFixedTest, NoClientsFails) {
  EXPECT_EQ(PraFixed({}, PrivacySpec::SecureAgg(1), 1).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(PraFixedTest, MatchesOracleViaPredictAtThreshold) {
  Rng rng(229);
  std::vector<LabeledScore> xs = RandomExamples(700, rng, 20);
  std::vector<ClientShard> shards = Singletons(xs);
  for (double t : {0.0, 0.2, 0.5, 0.95}) {
    PraEstimate e = *PraFixed(PredictAtThreshold(shards, t),
                              PrivacySpec::SecureAgg(1), 1);
    ExactPraResult exact = *ExactPra(xs, t);
    EXPECT_EQ(e.precision, exact.precision);
    EXPECT_EQ(e.recall, exact.recall);
    EXPECT_EQ(e.accuracy, exact.accuracy);
  }
}

// Mean of the noisy accuracy is close to the truth for both DP regimes.
TEST(PraFixedTest, NoisyCountersAreUnbiased) {
  Rng rng(233);
  std::vector<LabeledScore> xs = RandomExamples(20000, rng);
  std::vector<ClientShard> shards = Singletons(xs);
  std::vector<PredictionShard> preds = PredictAtThreshold(shards, 0.5);
  const double exact_correct = *ExactPra(xs, 0.5)->accuracy * xs.size();
  for (Regime regime : {Regime::kDistDp, Regime::kLocalDp}) {
    PrivacySpec spec = *PrivacySpec::Create(regime, 1.0, 1);
    const int runs = 200;
    double sum = 0.0, var = 0.0;
    for (int r = 0; r < runs; ++r) {
      PraEstimate e = *PraFixed(preds, spec, 1000 + r);
      sum += e.counters.correct.value;
      var = e.counters.correct.variance;
    }
    const double mean = sum / runs;
    EXPECT_NEAR(mean, exact_correct, 4.0 * std::sqrt(var / runs))
        << RegimeName(regime);
  }
}

TEST(PraFixedTest, DeterministicForSeed) {
  auto shards = Predictions({{true, Label::kPositive},
                             {false, Label::kNegative},
                             {true, Label::kNegative}});
  PrivacySpec spec = *PrivacySpec::Create(Regime::kDistDp, 1.0, 1);
  PraEstimate a = *PraFixed(shards, spec, 9);
  PraEstimate b = *PraFixed(shards, spec, 9);
  EXPECT_EQ(a.counters.correct, b.counters.correct);
  EXPECT_EQ(a.counters.true_positive, b.counters.true_positive);
}

// AucHistogram.

TEST(AucHistogramTest, SeparatedBuckets) {
  AucEstimate a = *AucHistogram(Hist({0.0, 0.5, 1.0}, {0, 2}, {2, 0}));
  EXPECT_EQ(a.value, 1.0);
  EXPECT_EQ(a.bucketization_halfwidth, 0.0);
  EXPECT_EQ(a.noise_variance, 0.0);
}

TEST(AucHistogramTest, SingleBucketIsOneHalf) {
  AucEstimate a = *AucHistogram(Hist({0.0, 1.0}, {3}, {5}));
  EXPECT_EQ(a.value, 0.5);
  EXPECT_EQ(a.bucketization_halfwidth, 0.5);
}

TEST(AucHistogramTest, NeedsBothClasses) {
  EXPECT_EQ(AucHistogram(Hist({0.0, 1.0}, {3}, {0})).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_FALSE(AucHistogram(Hist({0.0, 0.5, 1.0}, {3, 1}, {-2, 1})).ok());
}

TEST(AucHistogramTest, MatchesFormula) {
  AucEstimate a = *AucHistogram(
      Hist({0.0, 0.25, 0.5, 1.0}, {1, 2, 3}, {4, 2, 1}));
  // (1*(0 + 2) + 2*(4 + 1) + 3*(6 + 0.5)) / (6 * 7).
  EXPECT_DOUBLE_EQ(a.value, (2.0 + 10.0 + 19.5) / 42.0);
  EXPECT_DOUBLE_EQ(a.bucketization_halfwidth, (4.0 + 4.0 + 3.0) / 84.0);
}

// The exact AUC (either tie convention) lies in value +- halfwidth.
TEST(AucHistogramTest, EnvelopeContainsExactAuc) {
  Rng rng(239);
  std::uniform_int_distribution<int> size(2, 1000);
  std::uniform_int_distribution<int> buckets(1, 30);
  std::uniform_int_distribution<int> height(1, 12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<LabeledScore> xs =
        RandomExamples(size(rng), rng, trial % 4 == 0 ? 7 : 0);
    ScoreHistogram h =
        FromExamples(xs, PrivacySpec::SecureAgg(height(rng)), buckets(rng));
    AucEstimate a = *AucHistogram(h);
    ExactAucResult exact = *ExactAuc(xs);
    const double eps = 1e-12;
    EXPECT_LE(std::abs(a.value - exact.strict),
              a.bucketization_halfwidth + eps);
    EXPECT_LE(std::abs(a.value - exact.half_ties),
              a.bucketization_halfwidth + eps);
  }
}

// With fine leaves and distinct scores, 50 quantile buckets give an error of
// at most 1 / (2 * 50).
TEST(AucHistogramTest, FiftyBucketsWithinOneHundredth) {
  Rng rng(241);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<LabeledScore> xs = RandomExamples(1000, rng);
    AucEstimate a =
        *AucHistogram(FromExamples(xs, PrivacySpec::SecureAgg(20), 50));
    EXPECT_LE(std::abs(a.value - ExactAuc(xs)->half_ties), 0.01);
  }
}

TEST(AucHistogramTest, DistDpReportsNoiseVariance) {
  Rng rng(251);
  std::vector<LabeledScore> xs = RandomExamples(5000, rng);
  PrivacySpec spec = *PrivacySpec::Create(Regime::kDistDp, 1.0, 8);
  AucEstimate a = *AucHistogram(FromExamples(xs, spec, 10));
  EXPECT_GT(a.noise_variance, 0.0);
  EXPECT_LT(std::sqrt(a.noise_variance), 0.05);
  EXPECT_NEAR(a.value, ExactAuc(xs)->half_ties,
              a.bucketization_halfwidth + 5 * std::sqrt(a.noise_variance));
}

// Adding a positive above every negative never lowers the estimate when the
// bucket boundaries are kept.
TEST(AucHistogramTest, MonotoneInTopPositiveForFixedBuckets) {
  Rng rng(257);
  PrivacySpec spec = PrivacySpec::SecureAgg(16);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabeledScore> xs = RandomExamples(200, rng);
    double max_neg = 0.0;
    for (const LabeledScore& x : xs) {
      if (x.label == Label::kNegative) max_neg = std::max(max_neg, x.score);
    }
    std::vector<ClientShard> shards = Singletons(xs);
    ClassHierarchies h = *BuildClassHierarchies(shards, spec, 1);
    HierarchicalCounts all = *HierarchicalCounts::Sum(h.positive, h.negative);
    std::vector<int64_t> leaves = *QuantileLeafBoundaries(all, 8);
    const double before = AucHistogram(*HistogramFromLeafBoundaries(
                                           h.positive, h.negative, leaves))
                              ->value;
    shards.push_back({{{std::min(1.0, max_neg + 1e-3), Label::kPositive}}});
    ClassHierarchies g = *BuildClassHierarchies(shards, spec, 1);
    const double after = AucHistogram(*HistogramFromLeafBoundaries(
                                          g.positive, g.negative, leaves))
                             ->value;
    EXPECT_GE(after, before - 1e-12);
  }
}

// Rebuilding the quantile buckets can move a boundary and lower the
// estimate: {N 0.1, P 0.2} splits perfectly with two buckets, while after
// adding P 0.3 the lower bucket holds one pair of each class.
TEST(AucHistogramTest, RebuiltBucketsNeedNotBeMonotone) {
  PrivacySpec spec = PrivacySpec::SecureAgg(10);
  std::vector<LabeledScore> xs = {{0.1, Label::kNegative},
                                  {0.2, Label::kPositive}};
  EXPECT_EQ(AucHistogram(FromExamples(xs, spec, 2))->value, 1.0);
  xs.push_back({0.3, Label::kPositive});
  EXPECT_EQ(AucHistogram(FromExamples(xs, spec, 2))->value, 0.75);
}

}  // namespace
}  // namespace fedcal
