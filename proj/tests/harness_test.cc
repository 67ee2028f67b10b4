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
#include <string>
#include <tuple>
#include <vector>

#include "fedcal/harness.h"
#include "fedcal/io.h"
#include "fedcal/metrics.h"
#include "fedcal/oracle.h"
#include "fedcal/random.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedcal {
namespace {

using testing::RandomExamples;

std::vector<double> ClassScores(const std::vector<LabeledScore>& xs,
                                Label label) {
  std::vector<double> out;
  for (const LabeledScore& x : xs) {
    if (x.label == label) out.push_back(x.score);
  }
  return out;
}

double KsAgainstUniform(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = xs.size();
  double d = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    d = std::max({d, (i + 1) / n - xs[i], xs[i] - i / n});
  }
  return d;
}

bool LessExample(const LabeledScore& a, const LabeledScore& b) {
  return std::tie(a.score, a.label) < std::tie(b.score, b.label);
}

TEST(GenWellBehavedTest, FlatDensityIsUniform) {
  WellBehavedSpec spec;
  std::vector<LabeledScore> xs = *GenWellBehaved(100000, spec, 0.5, 401);
  ASSERT_EQ(xs.size(), 100000u);
  for (Label label : {Label::kPositive, Label::kNegative}) {
    std::vector<double> s = ClassScores(xs, label);
    // Asymptotic 1% critical value of the Kolmogorov distribution.
    EXPECT_LT(KsAgainstUniform(s), 1.6276 / std::sqrt(s.size()));
  }
}

TEST(GenWellBehavedTest, SpikeMass) {
  WellBehavedSpec spec;
  spec.spikes.push_back({0.7, 0.2, 0.05});
  spec.lipschitz = 1.0;
  std::vector<LabeledScore> xs = *GenWellBehaved(100000, spec, 0.5, 409);
  for (Label label : {Label::kPositive, Label::kNegative}) {
    std::vector<double> s = ClassScores(xs, label);
    const double mass = label == Label::kPositive ? 0.2 : 0.05;
    const double at_spike = std::count(s.begin(), s.end(), 0.7);
    const double expected = mass * s.size();
    EXPECT_NEAR(at_spike, expected,
                3.0 * std::sqrt(s.size() * mass * (1 - mass)));
  }
}

TEST(GenWellBehavedTest, DensitySlopeIsBounded) {
  WellBehavedSpec spec;
  spec.lipschitz = 1.5;
  std::vector<LabeledScore> xs = *GenWellBehaved(2000000, spec, 0.5, 419);
  for (Label label : {Label::kPositive, Label::kNegative}) {
    std::vector<double> s = ClassScores(xs, label);
    const int cells = 100;
    std::vector<double> count(cells, 0.0);
    for (double v : s) {
      count[std::min(cells - 1, static_cast<int>(v * cells))] += 1.0;
    }
    const double n = s.size();
    const double width = 1.0 / cells;
    double max_slope = 0.0, max_sd = 0.0;
    for (int i = 0; i + 1 < cells; ++i) {
      const double d0 = count[i] / (n * width);
      const double d1 = count[i + 1] / (n * width);
      max_slope = std::max(max_slope, std::abs(d1 - d0) / width);
      max_sd = std::max(max_sd, std::sqrt(count[i] + count[i + 1]) /
                                    (n * width * width));
    }
    EXPECT_LE(max_slope, spec.lipschitz + 4.5 * max_sd);
    // The least-squares slope of the density is the Lipschitz constant
    // (positives rise, negatives fall).
    std::vector<double> centers, dens;
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < cells; ++i) {
      centers.push_back((i + 0.5) * width);
      dens.push_back(count[i] / (n * width));
      mx += centers.back() / cells;
      my += dens.back() / cells;
    }
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < cells; ++i) {
      sxy += (centers[i] - mx) * (dens[i] - my);
      sxx += (centers[i] - mx) * (centers[i] - mx);
    }
    const double sign = label == Label::kPositive ? 1.0 : -1.0;
    EXPECT_NEAR(sxy / sxx, sign * spec.lipschitz, 0.05);
  }
}

TEST(GenWellBehavedTest, SteepRampStaysInRange) {
  WellBehavedSpec spec;
  spec.lipschitz = 8.0;
  std::vector<LabeledScore> xs = *GenWellBehaved(20000, spec, 0.3, 421);
  const double a = 1.0 - std::sqrt(2.0 / 8.0);
  int positives = 0;
  for (const LabeledScore& x : xs) {
    ASSERT_GE(x.score, 0.0);
    ASSERT_LE(x.score, 1.0);
    if (x.label == Label::kPositive) {
      ++positives;
      EXPECT_GE(x.score, a);
    } else {
      EXPECT_LE(x.score, 1.0 - a);
    }
  }
  EXPECT_NEAR(positives, 6000, 4 * std::sqrt(20000 * 0.3 * 0.7));
}

TEST(GenWellBehavedTest, DeterministicAndValidated) {
  WellBehavedSpec spec;
  spec.lipschitz = 1.0;
  EXPECT_EQ(*GenWellBehaved(1000, spec, 0.5, 7),
            *GenWellBehaved(1000, spec, 0.5, 7));
  EXPECT_NE(*GenWellBehaved(1000, spec, 0.5, 7),
            *GenWellBehaved(1000, spec, 0.5, 8));
  EXPECT_FALSE(GenWellBehaved(-1, spec, 0.5, 1).ok());
  EXPECT_FALSE(GenWellBehaved(10, spec, 1.5, 1).ok());
  spec.spikes.push_back({0.5, 0.7, 0.0});
  spec.spikes.push_back({0.6, 0.7, 0.0});
  EXPECT_FALSE(GenWellBehaved(10, spec, 0.5, 1).ok());
}

TEST(SplitPolicyTest, ParseAndName) {
  EXPECT_EQ(ParseSplitPolicy("one_per_client")->kind,
            SplitPolicy::Kind::kOnePerClient);
  SplitPolicy skewed = *ParseSplitPolicy("skewed:0.8");
  EXPECT_EQ(skewed.kind, SplitPolicy::Kind::kSkewedByClass);
  EXPECT_EQ(skewed.parameter, 0.8);
  EXPECT_EQ(SplitPolicyName(skewed), "skewed:0.8");
  EXPECT_EQ(ParseSplitPolicy("variable:4")->parameter, 4.0);
  EXPECT_FALSE(ParseSplitPolicy("skewed:0").ok());
  EXPECT_FALSE(ParseSplitPolicy("skewed:1.5").ok());
  EXPECT_FALSE(ParseSplitPolicy("variable:-1").ok());
  EXPECT_FALSE(ParseSplitPolicy("round_robin").ok());
}

TEST(SplitToClientsTest, OnePerClient) {
  Rng rng(431);
  std::vector<LabeledScore> xs = RandomExamples(50, rng);
  std::vector<ClientShard> shards = *SplitToClients(xs, {}, 1);
  ASSERT_EQ(shards.size(), 50u);
  for (size_t i = 0; i < xs.size(); ++i) {
    ASSERT_EQ(shards[i].examples.size(), 1u);
    EXPECT_EQ(shards[i].examples[0], xs[i]);
  }
}

TEST(SplitToClientsTest, UnionIsInputForEveryPolicy) {
  Rng rng(433);
  std::uniform_int_distribution<int> size(1, 400);
  for (const char* name :
       {"one_per_client", "skewed:0.9", "skewed:1", "skewed:0.3",
        "variable:0.5", "variable:5"}) {
    SplitPolicy policy = *ParseSplitPolicy(name);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<LabeledScore> xs = RandomExamples(size(rng), rng, 9);
      std::vector<ClientShard> shards = *SplitToClients(xs, policy, trial);
      std::vector<LabeledScore> joined;
      for (const ClientShard& s : shards) {
        joined.insert(joined.end(), s.examples.begin(), s.examples.end());
      }
      std::sort(joined.begin(), joined.end(), LessExample);
      std::sort(xs.begin(), xs.end(), LessExample);
      EXPECT_EQ(joined, xs) << name;
    }
  }
}

TEST(SplitToClientsTest, SkewConcentratesPositives) {
  Rng rng(439);
  std::vector<LabeledScore> xs = RandomExamples(1000, rng);
  std::vector<ClientShard> shards =
      *SplitToClients(xs, *ParseSplitPolicy("skewed:0.8"), 1);
  int lopsided = 0;
  for (const ClientShard& s : shards) {
    int pos = 0;
    for (const LabeledScore& x : s.examples) pos += x.label == Label::kPositive;
    if (!s.examples.empty() && (pos == 0 || pos == (int)s.examples.size())) {
      ++lopsided;
    }
  }
  EXPECT_GT(lopsided, 0);
}

TEST(EvaluateCellTest, RowsAndOrder) {
  Rng rng(443);
  std::vector<LabeledScore> xs = RandomExamples(2000, rng);
  EvaluationOptions opts;
  opts.thresholds = {0.3, 0.7};
  opts.ece = true;
  opts.calibration = {CalibrationMethod::kHistogram, CalibrationMethod::kBbq};
  std::vector<SweepResultRow> rows = *EvaluateCell(xs, {}, opts, 5);
  std::vector<std::string> metrics;
  for (const SweepResultRow& r : rows) metrics.push_back(r.metric);
  EXPECT_EQ(metrics, (std::vector<std::string>{
                         "auc", "precision", "recall", "accuracy", "precision",
                         "recall", "accuracy", "ece", "ece_bbq"}));
  for (const SweepResultRow& r : rows) {
    ASSERT_TRUE(r.estimate.has_value()) << r.metric;
    EXPECT_EQ(*r.abs_error, std::abs(*r.estimate - *r.exact));
    EXPECT_EQ(r.num_examples, 2000);
    EXPECT_EQ(r.wall_ms, 0.0);
  }
  EXPECT_EQ(*rows[1].threshold, 0.3);
  EXPECT_EQ(*rows[4].threshold, 0.7);
}

TEST(EvaluateCellTest, SecureAggInvariantToSplit) {
  WellBehavedSpec spec;
  spec.lipschitz = 1.0;
  spec.spikes.push_back({0.4, 0.05, 0.1});
  std::vector<LabeledScore> xs = *GenWellBehaved(5000, spec, 0.4, 3);
  EvaluationOptions opts;
  opts.thresholds = {0.5};
  std::vector<SweepResultRow> base = *EvaluateCell(xs, {}, opts, 11);
  for (const char* name : {"skewed:0.7", "variable:3"}) {
    opts.split = *ParseSplitPolicy(name);
    std::vector<SweepResultRow> other = *EvaluateCell(xs, {}, opts, 11);
    ASSERT_EQ(other.size(), base.size());
    for (size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(other[i].estimate, base[i].estimate) << name;
      EXPECT_EQ(other[i].advertised_uncertainty,
                base[i].advertised_uncertainty);
    }
  }
}

TEST(EvaluateCellTest, DegenerateRowsAreRecorded) {
  std::vector<LabeledScore> xs = {{0.2, Label::kPositive},
                                  {0.8, Label::kPositive}};
  EvaluationOptions opts;
  opts.thresholds = {0.5};
  std::vector<SweepResultRow> rows = *EvaluateCell(xs, {}, opts, 1);
  EXPECT_EQ(rows[0].metric, "auc");
  EXPECT_TRUE(rows[0].degenerate.has_value());
  EXPECT_FALSE(rows[0].estimate.has_value());
}

TEST(EvaluateCellTest, RejectsInvalidCell) {
  std::vector<LabeledScore> xs = {{0.2, Label::kPositive},
                                  {0.8, Label::kNegative}};
  EXPECT_FALSE(EvaluateCell(xs, {Regime::kDistDp, std::nullopt, 4, 2}, {}, 1)
                   .ok());
  EXPECT_FALSE(EvaluateCell(xs, {Regime::kSecureAgg, {}, 0, 2}, {}, 1).ok());
  EXPECT_FALSE(EvaluateCell(xs, {Regime::kSecureAgg, {}, 4, 0}, {}, 1).ok());
}

TEST(BoundaryBudgetTest, SecureAggIgnoresSplit) {
  Rng rng(17);
  std::vector<LabeledScore> xs = RandomExamples(3000, rng);
  EvaluationOptions opts;
  opts.thresholds = {0.4};
  opts.ece = true;
  opts.calibration = {CalibrationMethod::kHistogram, CalibrationMethod::kBbq};
  std::vector<SweepResultRow> shared = *EvaluateCell(xs, {}, opts, 8);
  opts.boundary_budget = BoundaryBudget::kSplit;
  std::vector<SweepResultRow> split = *EvaluateCell(xs, {}, opts, 8);
  ASSERT_EQ(shared.size(), split.size());
  for (size_t i = 0; i < shared.size(); ++i) {
    EXPECT_EQ(shared[i].estimate, split[i].estimate) << shared[i].metric;
  }
}

TEST(BoundaryBudgetTest, SplitReleasesDifferUnderDp) {
  WellBehavedSpec spec;
  spec.lipschitz = 1.0;
  std::vector<LabeledScore> xs = *GenWellBehaved(20000, spec, 0.5, 4);
  const CellCoordinates cell{Regime::kDistDp, 1.0, 8, 10};
  EvaluationOptions opts;
  opts.thresholds = {0.5};
  opts.ece = true;
  std::vector<SweepResultRow> shared = *EvaluateCell(xs, cell, opts, 21);
  opts.boundary_budget = BoundaryBudget::kSplit;
  std::vector<SweepResultRow> split = *EvaluateCell(xs, cell, opts, 21);
  std::vector<SweepResultRow> again = *EvaluateCell(xs, cell, opts, 21);
  ASSERT_EQ(shared.size(), split.size());
  ASSERT_TRUE(split[0].estimate.has_value());
  EXPECT_NE(shared[0].estimate, split[0].estimate);
  EXPECT_LT(*split[0].abs_error, 0.1);
  for (size_t i = 0; i < split.size(); ++i) {
    EXPECT_EQ(split[i].estimate, again[i].estimate) << split[i].metric;
  }
}

TEST(FitCalibrationTest, HistogramMapHasOneValuePerBucket) {
  Rng rng(29);
  std::vector<LabeledScore> xs = RandomExamples(4000, rng);
  const CellCoordinates cell{Regime::kSecureAgg, std::nullopt, 8, 6};
  CalibrationMap map =
      *FitCalibration(xs, cell, {}, CalibrationMethod::kHistogram, 3);
  ASSERT_EQ(map.binnings().size(), 1u);
  EXPECT_EQ(map.binnings()[0].values.size(), 6u);
  CalibrationMap again =
      *FitCalibration(xs, cell, {}, CalibrationMethod::kHistogram, 3);
  EXPECT_EQ(map.binnings()[0].values, again.binnings()[0].values);
  EXPECT_FALSE(FitCalibration(xs, {Regime::kSecureAgg, {}, 8, 0}, {},
                              CalibrationMethod::kHistogram, 3)
                   .ok());
}

SweepConfig SmallSweep() {
  SweepConfig c;
  c.data_spec.lipschitz = 1.0;
  c.sizes = {400, 900};
  c.buckets = {4, 8};
  c.heights = {6};
  c.epsilons = {1.0};
  c.regimes = {Regime::kSecureAgg, Regime::kDistDp, Regime::kLocalDp};
  c.repetitions = 5;
  c.seed = 77;
  c.evaluation.thresholds = {0.5};
  return c;
}

TEST(RunSweepTest, EmptyGridsGiveNoRows) {
  SweepConfig c = SmallSweep();
  c.buckets.clear();
  EXPECT_TRUE(RunSweep(c)->empty());
  c = SmallSweep();
  c.regimes.clear();
  EXPECT_TRUE(RunSweep(c)->empty());
  c = SmallSweep();
  c.sizes.clear();
  EXPECT_TRUE(RunSweep(c)->empty());
}

TEST(RunSweepTest, RepetitionCardinality) {
  SweepConfig c = SmallSweep();
  std::vector<SweepResultRow> rows = *RunSweep(c);
  std::map<std::tuple<std::string, int, int64_t, int, double>, int> per_point;
  for (const SweepResultRow& r : rows) {
    ++per_point[{r.metric, static_cast<int>(r.regime), r.num_examples,
                 r.buckets, r.epsilon.value_or(-1)}];
  }
  // 2 sizes, 2 bucket counts, 3 regimes, 4 metrics.
  EXPECT_EQ(per_point.size(), 2u * 2 * 3 * 4);
  for (const auto& [key, count] : per_point) EXPECT_EQ(count, 5);
}

TEST(RunSweepTest, DeterministicAcrossRunsAndThreads) {
  SweepConfig c = SmallSweep();
  auto serialize = [](const std::vector<SweepResultRow>& rows) {
    std::string out;
    for (const SweepResultRow& r : rows) out += RowToJsonLine(r) + "\n";
    return out;
  };
  const std::string a = serialize(*RunSweep(c));
  EXPECT_EQ(a, serialize(*RunSweep(c)));
  EXPECT_EQ(a, serialize(*RunSweep(c, {}, 3)));
}

TEST(RunSweepTest, SecureAggAucWithinEnvelope) {
  SweepConfig c = SmallSweep();
  c.regimes = {Regime::kSecureAgg};
  c.data_spec.spikes.push_back({0.3, 0.1, 0.2});
  std::vector<SweepResultRow> rows = *RunSweep(c);
  for (const SweepResultRow& r : rows) {
    if (r.metric != "auc") continue;
    EXPECT_LE(*r.abs_error, *r.advertised_uncertainty + 1e-12);
  }
}

TEST(RunSweepTest, UsesLoadedData) {
  Rng rng(449);
  std::vector<LabeledScore> xs = RandomExamples(300, rng);
  SweepConfig c = SmallSweep();
  c.data_path = "in-memory";
  c.sizes.clear();
  c.regimes = {Regime::kSecureAgg};
  c.repetitions = 1;
  std::vector<SweepResultRow> rows = *RunSweep(c, xs);
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows[0].num_examples, 300);
  EXPECT_EQ(*rows[0].exact, ExactAuc(xs)->half_ties);
}

TEST(RunSweepTest, RejectsBadConfig) {
  SweepConfig c = SmallSweep();
  c.repetitions = 0;
  EXPECT_FALSE(RunSweep(c).ok());
  c = SmallSweep();
  c.epsilons = {-1.0};
  EXPECT_FALSE(RunSweep(c).ok());
}

}  // namespace
}  // namespace fedcal
