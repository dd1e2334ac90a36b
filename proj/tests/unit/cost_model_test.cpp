// Copyright 2026 The HeteroPP Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace heteropp {
namespace {

using testing::chip;
using testing::FlatEntry;
using testing::flat_profile;
using testing::group;
using testing::kGB;
using testing::kMs;

ProfileTable ms_table() {
  ProfileTable t;
  t.set_chip("A", flat_profile(8, {2 * kMs, 4 * kMs, 2 * kMs, 3 * kMs, 0.5 * kGB, 0.1 * kGB, kGB},
                               {1, 2, 4}));
  return t;
}

TEST(StageComputeTime, HandEvaluated) {
  const ProfileTable t = ms_table();
  EXPECT_NEAR(stage_compute_time(t, "A", 1, 4, true), 32 * kMs, 1e-15);
  EXPECT_NEAR(stage_compute_time(t, "A", 1, 4, false), 24 * kMs, 1e-15);
  EXPECT_DOUBLE_EQ(stage_compute_time(t, "A", 2, 1, false), 2 * kMs + 4 * kMs);
  EXPECT_THROW(stage_compute_time(t, "A", 1, 0, false), InputError);
}

TEST(StageUpdateTime, HandEvaluated) {
  const ProfileTable t = ms_table();
  EXPECT_NEAR(stage_update_time(t, "A", 2, 4, 4), 12 * kMs, 1e-15);
  EXPECT_DOUBLE_EQ(stage_update_time(t, "A", 1, 1, 1), 3 * kMs);
  EXPECT_THROW(stage_update_time(t, "A", 8, 1, 1), ProfileEntryAbsent);
}

// Stage compute 10 ms (fwd 4 + bwd 6 on one layer), update 5 ms.
ProfileTable two_stage_table() {
  ProfileTable t;
  t.set_chip("H", flat_profile(1, {4 * kMs, 6 * kMs, 4 * kMs, 5 * kMs, 1, 1, 1}, {1}));
  return t;
}

TEST(EstimateIterationTime, HomogeneousClosedForm) {
  const ProfileTable t = two_stage_table();
  ParallelPlan p{1, 4, {group("H", 2, 1, false, 2)}};
  WorkloadSpec w{2, 4, 1.0, 0.0};
  const CostBreakdown c = estimate_iteration_time(p, t, w);
  EXPECT_NEAR(c.total, 55 * kMs, 1e-15);
  ASSERT_EQ(c.stages.size(), 2u);
  EXPECT_NEAR(c.stages[0].bubble_term, 10 * kMs, 1e-15);

  w.bubble_coefficient = 0.0;
  EXPECT_NEAR(estimate_iteration_time(p, t, w).total, 45 * kMs, 1e-15);
}

TEST(EstimateIterationTime, HeterogeneousDirectEvaluation) {
  ProfileTable t;
  t.set_chip("X", flat_profile(1, {4 * kMs, 6 * kMs, 1, 2 * kMs, 1, 1, 1}, {1}));
  t.set_chip("Y", flat_profile(1, {2 * kMs, 4 * kMs, 1, 2 * kMs, 1, 1, 1}, {1}));
  ParallelPlan p{1, 4, {group("X", 1, 1, false, 1), group("Y", 1, 1, false, 1)}};
  const CostBreakdown c = estimate_iteration_time(p, t, WorkloadSpec{2, 4, 1.0, 0.0});
  EXPECT_NEAR(c.stages[0].stage_total, 48 * kMs, 1e-15);
  EXPECT_NEAR(c.stages[1].stage_total, 36 * kMs, 1e-15);
  EXPECT_NEAR(c.total, 48 * kMs, 1e-15);
  EXPECT_EQ(c.argmax_stages(), std::vector<int>{1});
}

TEST(EstimateIterationTime, OverheadIsAdditive) {
  const ProfileTable t = two_stage_table();
  ParallelPlan p{1, 4, {group("H", 2, 1, false, 2)}};
  EXPECT_NEAR(estimate_iteration_time(p, t, WorkloadSpec{2, 4, 1.0, 0.25}).total, 0.305, 1e-15);
}

// Memory example shape: mem_model 1 GB, mem_act 0.5 GB (0.1 GB with
// recompute), 4 layers per stage, 2 stages, b = 8.
ProfileTable memory_table() {
  ProfileTable t;
  t.set_chip("M", flat_profile(1, {1, 1, 1, 1, 0.5 * kGB, 0.1 * kGB, kGB}, {1}));
  return t;
}

TEST(StagePeakMemory, HandEvaluated) {
  const ProfileTable t = memory_table();
  ParallelPlan p{1, 8, {group("M", 2, 1, false, 8)}};
  EXPECT_NEAR(stage_peak_memory(p, 1, t), 8 * kGB, 1e-3);
  EXPECT_NEAR(stage_peak_memory(p, 2, t), 6 * kGB, 1e-3);
  p.groups[0].recompute = true;
  EXPECT_NEAR(stage_peak_memory(p, 1, t), 4.8 * kGB, 1e-3);
  EXPECT_THROW(stage_peak_memory(p, 3, t), InputError);
  EXPECT_THROW(stage_peak_memory(p, 0, t), InputError);
}

TEST(StagePeakMemory, SingleMicrobatchHoldsOne) {
  const ProfileTable t = memory_table();
  ParallelPlan p{1, 1, {group("M", 4, 1, false, 8)}};
  for (int s = 1; s <= 4; ++s) EXPECT_NEAR(stage_peak_memory(p, s, t), 2 * kGB + kGB, 1e-3);
}

TEST(StagePeakMemory, InFlightNonIncreasingAndOneAtTail) {
  for (int b : {1, 2, 5, 16}) {
    for (int p = 1; p <= 9; ++p) {
      int prev = b + p;
      for (int s = 1; s <= p; ++s) {
        const int w = detail::in_flight(b, p, s);
        EXPECT_LE(w, prev);
        EXPECT_EQ(w, std::min(b, p - s + 1));
        prev = w;
      }
      EXPECT_EQ(detail::in_flight(b, p, p), 1);
    }
  }
}

struct FeasibilityFixture : ::testing::Test {
  ClusterSpec cluster;
  ProfileTable profile;
  WorkloadSpec workload{8, 4, 1.0, 0.0};

  void SetUp() override {
    cluster.chip_types = {chip("Chip-C", 8, 32 * kGB, 8, 16)};
    profile.set_chip("Chip-C", flat_profile(8, {1, 1, 1, 1, 1 * kGB, 0.1 * kGB, 1 * kGB}, {1, 2, 4}));
  }
};

TEST_F(FeasibilityFixture, OverBudgetStageNamesChip) {
  // One stage, one microbatch in flight, 4 GB activations: 8 + 32 = 40 GB on 32 GB.
  profile.set_chip("Chip-C", flat_profile(8, {1, 1, 1, 1, 4 * kGB, 0.1 * kGB, 1 * kGB}, {1, 2, 4}));
  ParallelPlan p{1, 4, {group("Chip-C", 1, 8, false, 8)}};
  const FeasibilityVerdict v = check_plan_feasibility(p, cluster, profile, workload);
  EXPECT_FALSE(v);
  EXPECT_EQ(v.stage, 1);
  EXPECT_EQ(v.chip, "Chip-C");
  EXPECT_NE(v.violation.find("Chip-C"), std::string::npos) << v.violation;
}

TEST_F(FeasibilityFixture, UnderBudgetStageIsFeasible) {
  // Two stages of 4 layers, w = 2 at the head: 4 + 8 = 12 GB.
  ParallelPlan p{1, 4, {group("Chip-C", 2, 4, false, 8)}};
  const FeasibilityVerdict v = check_plan_feasibility(p, cluster, profile, workload);
  EXPECT_TRUE(v) << v.violation;
  ASSERT_EQ(v.slack.size(), 2u);
  EXPECT_NEAR(v.slack[0], 32 * kGB - 12 * kGB, 1e-3);
  EXPECT_NEAR(v.slack[1], 32 * kGB - 8 * kGB, 1e-3);
}

TEST_F(FeasibilityFixture, StructuralViolations) {
  auto rejected = [&](ParallelPlan p) { return !check_plan_feasibility(p, cluster, profile, workload); };
  cluster.chip_types[0].count = 16;
  cluster.chip_types[0].tp_max = 16;
  EXPECT_TRUE(rejected({1, 4, {group("Chip-C", 1, 16, false, 8)}}));  // tp above profiled cap
  cluster.chip_types[0] = chip("Chip-C", 8, 32 * kGB, 8, 16);
  EXPECT_TRUE(rejected({1, 4, {group("Chip-C", 2, 4, false, 7)}}));  // layers not divisible
  EXPECT_TRUE(rejected({1, 4, {group("Chip-C", 2, 4, false, 6)}}));  // layers != L
  EXPECT_TRUE(rejected({2, 4, {group("Chip-C", 2, 4, false, 8)}}));  // b * dp != B, chip count
  EXPECT_TRUE(rejected({1, 4, {group("Chip-C", 4, 4, false, 8)}}));  // 16 chips != 8
  EXPECT_FALSE(rejected({1, 4, {group("Chip-C", 8, 1, false, 8)}}));
  EXPECT_TRUE(rejected({1, 4, {group("Chip-C", 2, 3, false, 8)}}));  // tp not a power of two
  EXPECT_TRUE(rejected({1, 4, {group("nope", 2, 4, false, 8)}}));
  EXPECT_TRUE(rejected({1, 4, {}}));
}

TEST(EstimateIterationTime, MatchesReferenceAndProperties) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> t(1e-3, 1e-1);
  std::uniform_int_distribution<int> small(1, 4);
  for (int trial = 0; trial < 300; ++trial) {
    ProfileTable table;
    ParallelPlan plan;
    plan.dp = 1;
    plan.microbatches = small(rng) * 2;
    const int types = small(rng);
    for (int i = 0; i < types; ++i) {
      const std::string name = "t" + std::to_string(i);
      table.set_chip(name, flat_profile(1, {t(rng), t(rng), t(rng), t(rng), 1, 1, 1}, {1}));
      const int pp = small(rng);
      plan.groups.push_back(group(name, pp, 1, small(rng) % 2 == 0, pp * small(rng)));
    }
    const double alpha = trial % 3 == 0 ? 0.0 : 1.0;
    const WorkloadSpec w{plan.total_layers(), plan.microbatches, alpha, 0.0};
    const CostBreakdown c = estimate_iteration_time(plan, table, w);
    EXPECT_TRUE(testing::near_rel(c.total, testing::reference_iteration_time(plan, table, alpha), 1e-12));

    // More microbatches or more layers never make the iteration shorter.
    ParallelPlan more_b = plan;
    ++more_b.microbatches;
    EXPECT_GE(estimate_iteration_time(more_b, table, w).total, c.total);
    ParallelPlan more_l = plan;
    more_l.groups[0].layers += more_l.groups[0].pp;
    EXPECT_GE(estimate_iteration_time(more_l, table, w).total, c.total);

    // Scaling every time by k scales T and keeps the bottleneck stages.
    ProfileTable scaled;
    for (const auto& [name, prof] : table.chips()) {
      ChipProfile q = prof;
      for (auto& [tp, lt] : q.times) lt = {lt.fwd * 4, lt.bwd * 4, lt.recomp * 4};
      for (auto& [k, u] : q.update) u *= 4;
      scaled.set_chip(name, q);
    }
    const CostBreakdown cs = estimate_iteration_time(plan, scaled, w);
    EXPECT_TRUE(testing::near_rel(cs.total, 4 * c.total, 1e-12));
    EXPECT_EQ(cs.argmax_stages(), c.argmax_stages());
  }
}

TEST(EstimateIterationTime, HomogeneousReductionIsExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> t(1e-3, 1e-1);
  for (int trial = 0; trial < 200; ++trial) {
    const int pp = 1 + static_cast<int>(rng() % 8);
    const int lps = 1 + static_cast<int>(rng() % 5);
    const int b = 1 + static_cast<int>(rng() % 32);
    const FlatEntry e{t(rng), t(rng), t(rng), t(rng), 1, 1, 1};
    ProfileTable table;
    table.set_chip("H", flat_profile(1, e, {1}));
    ParallelPlan plan{1, b, {group("H", pp, 1, false, pp * lps)}};
    const double comp = lps * (e.fwd + e.bwd);
    const double closed = (b + pp - 1) * comp + lps * e.update;
    const double total = estimate_iteration_time(plan, table, WorkloadSpec{pp * lps, b, 1.0, 0.0}).total;
    EXPECT_TRUE(testing::near_rel(total, closed, 4e-16 * (b + pp))) << total << " vs " << closed;
  }
}

}  // namespace
}  // namespace heteropp
