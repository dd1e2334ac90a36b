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

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace heteropp {
namespace {

using testing::chip;
using testing::kGB;

using PpTp = std::vector<std::pair<int, int>>;

TEST(FeasibleTpPp, ChipAShape) {
  const ChipTypeSpec a = chip("A", 256, 96 * kGB, 8, 16);
  EXPECT_EQ(feasible_tp_pp(a, 4), (PpTp{{64, 1}, {32, 2}, {16, 4}, {8, 8}}));
  EXPECT_TRUE(feasible_tp_pp(a, 3).empty());
  const ChipTypeSpec narrow = chip("N", 256, 96 * kGB, 4, 16);
  EXPECT_EQ(feasible_tp_pp(narrow, 4), (PpTp{{64, 1}, {32, 2}, {16, 4}}));
}

TEST(EnumerateDp, Divisors) {
  ClusterSpec c;
  c.chip_types = {chip("x", 64, kGB, 8, 8)};
  EXPECT_EQ(enumerate_dp(8, c), (std::vector<int>{1, 2, 4, 8}));
  ClusterSpec seven;
  seven.chip_types = {chip("s", 7, kGB, 1, 8)};
  EXPECT_EQ(enumerate_dp(7, seven), (std::vector<int>{1, 7}));
}

TEST(EnumerateDp, ExcludesDpBeyondChipCount) {
  ClusterSpec c;
  c.chip_types = {chip("A", 256, kGB, 8, 16)};
  const auto dps = enumerate_dp(512, c);
  EXPECT_EQ(dps, (std::vector<int>{1, 2, 4, 8, 16, 32, 64, 128, 256}));
}

Instance desk_instance() {
  // Two types of 16 chips, tp_max 4, L = 24, B = 16.
  Instance inst;
  inst.workload = {24, 16, 1.0, 0.0};
  const auto dps = divisors(16);
  SyntheticChipParams big;
  big.flops_ratio = 0.6;
  big.base_layer_seconds = 0.02;
  big.layer_state_bytes = 2 * kGB;
  big.activation_bytes = 0.3 * kGB;
  big.tp_max = 4;
  big.dp_values = dps;
  big.tp_efficiency = {{2, 0.9}, {4, 0.8}};
  SyntheticChipParams fast = big;
  fast.flops_ratio = 1.5;
  inst.cluster.chip_types = {chip("big", 16, 40 * kGB, 4, 8), chip("fast", 16, 16 * kGB, 4, 8)};
  inst.cluster = validate_cluster_spec(inst.cluster);
  inst.profile.set_chip("big", synthesize_profile(big));
  inst.profile.set_chip("fast", synthesize_profile(fast));
  return inst;
}

TEST(SearchPlan, DeskInstanceMatchesOracle) {
  const Instance inst = desk_instance();
  const SearchResult s = search_plan(inst.cluster, inst.profile, inst.workload);
  const SearchResult o = brute_force_oracle(inst.cluster, inst.profile, inst.workload);
  EXPECT_EQ(s.cost.total, o.cost.total);
  EXPECT_EQ(s.plan, o.plan);
  EXPECT_TRUE(check_plan_feasibility(s.plan, inst.cluster, inst.profile, inst.workload));
  EXPECT_EQ(s.plan.groups.size(), 2u);
}

TEST(SearchPlan, HomogeneousIsUniformClosedForm) {
  Instance inst = catalogue_instance("A", {64}, 64LL * 4096, ModelShape{});
  inst.workload.total_layers = 32;
  const SearchResult s = search_plan(inst.cluster, inst.profile, inst.workload);
  ASSERT_EQ(s.plan.groups.size(), 1u);
  const StageGroup& g = s.plan.groups[0];
  EXPECT_EQ(g.layers % g.pp, 0);
  const ProfileEntry e = lookup_profile(inst.profile, g.chip, s.plan.dp, g.tp, g.recompute);
  const int lps = g.layers_per_stage();
  const double comp = lps * (e.t_fwd + e.t_bwd + (g.recompute ? e.t_recomp : 0.0));
  const double closed = (s.plan.microbatches + g.pp - 1) * comp + lps * e.t_update;
  EXPECT_TRUE(testing::near_rel(s.cost.total, closed, 1e-14));
}

TEST(SearchPlan, NoFeasiblePlan) {
  Instance inst = desk_instance();
  for (auto& c : inst.cluster.chip_types) c.safe_memory = 1e6;
  try {
    search_plan(inst.cluster, inst.profile, inst.workload);
    FAIL();
  } catch (const Infeasible& e) {
    EXPECT_STREQ(e.what(), "no feasible plan");
  }
  EXPECT_THROW(brute_force_oracle(inst.cluster, inst.profile, inst.workload), Infeasible);
}

TEST(SearchPlan, MissingProfileEntriesAreSkipped) {
  Instance inst = desk_instance();
  // Drop every dp except 2 from one chip's update table.
  ChipProfile p = *inst.profile.chip("fast");
  std::erase_if(p.update, [](const auto& kv) { return kv.first.first != 2; });
  inst.profile.set_chip("fast", p);
  const SearchResult s = search_plan(inst.cluster, inst.profile, inst.workload);
  EXPECT_EQ(s.plan.dp, 2);
  EXPECT_EQ(s.cost.total, brute_force_oracle(inst.cluster, inst.profile, inst.workload).cost.total);
}

TEST(SearchPlan, WorkerCountDoesNotChangeResult) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const Instance inst = random_instance(seed);
    std::optional<SearchResult> one, many;
    try {
      one = search_plan(inst.cluster, inst.profile, inst.workload, {1});
      many = search_plan(inst.cluster, inst.profile, inst.workload, {4});
    } catch (const Infeasible&) {
      continue;
    }
    EXPECT_EQ(one->plan, many->plan) << seed;
    EXPECT_EQ(one->cost.total, many->cost.total) << seed;
  }
}

TEST(SearchPlan, AgreesWithOracleOnRandomInstances) {
  int compared = 0;
  for (std::uint64_t seed = 0; compared < 60 && seed < 1000; ++seed) {
    const Instance inst = random_instance(seed);
    std::optional<SearchResult> s, o;
    try {
      s = search_plan(inst.cluster, inst.profile, inst.workload);
    } catch (const Infeasible&) {
    }
    try {
      o = brute_force_oracle(inst.cluster, inst.profile, inst.workload);
    } catch (const Infeasible&) {
    }
    ASSERT_EQ(s.has_value(), o.has_value()) << seed;
    if (!s) continue;
    ++compared;
    EXPECT_EQ(s->cost.total, o->cost.total) << seed;
    EXPECT_TRUE(check_plan_feasibility(s->plan, inst.cluster, inst.profile, inst.workload)) << seed;
    EXPECT_TRUE(testing::near_rel(
        s->cost.total, testing::reference_iteration_time(s->plan, inst.profile, 1.0), 1e-12));
  }
  EXPECT_EQ(compared, 60);
}

TEST(BruteForceOracle, RejectsOversizedInstances) {
  Instance inst = desk_instance();
  inst.workload.total_layers = 65;
  EXPECT_THROW(brute_force_oracle(inst.cluster, inst.profile, inst.workload), InputError);
}

TEST(SplitIntoGroups, RemainderFormsLastGroup) {
  EXPECT_EQ(split_into_groups(256, 128), (std::vector<int>{128, 128}));
  EXPECT_EQ(split_into_groups(300, 128), (std::vector<int>{128, 128, 44}));
  EXPECT_EQ(split_into_groups(16, 128), std::vector<int>{16});
}

TEST(TwoStageSearch, OneGroupPerTypeReproducesSearchPlan) {
  const Instance inst = desk_instance();
  const TwoStageResult r = two_stage_search(inst.cluster, inst.profile, inst.workload, 16);
  EXPECT_FALSE(r.used_stage2);
  EXPECT_EQ(r.best.plan, r.stage1.plan);
  EXPECT_EQ(r.best.cost.total, search_plan(inst.cluster, inst.profile, inst.workload).cost.total);
}

TEST(TwoStageSearch, NeverWorseThanStageOne) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Instance inst = random_instance(seed, 24);
    std::optional<TwoStageResult> r;
    try {
      r = two_stage_search(inst.cluster, inst.profile, inst.workload, 8);
    } catch (const Infeasible&) {
      continue;
    }
    EXPECT_LE(r->best.cost.total, r->stage1.cost.total);
    EXPECT_EQ(r->best.plan.dp, r->stage1.plan.dp);
    EXPECT_TRUE(check_plan_feasibility(r->best.plan, inst.cluster, inst.profile, inst.workload));
  }
}

// One 32-chip type split into two 16-chip groups. The exhaustive reference
// enumerates both tp orders and keeps only monotone ones.
TEST(TwoStageSearch, MonotoneTpAcrossGroupsMatchesReference) {
  Instance inst;
  inst.workload = {16, 8, 1.0, 0.0};
  SyntheticChipParams p;
  p.flops_ratio = 1.0;
  p.base_layer_seconds = 0.01;
  p.layer_state_bytes = 3 * kGB;
  p.activation_bytes = 1 * kGB;
  p.tp_max = 4;
  p.dp_values = divisors(8);
  p.tp_efficiency = {{2, 0.85}, {4, 0.7}};
  inst.cluster.chip_types = {chip("T", 32, 24 * kGB, 4, 8)};
  inst.profile.set_chip("T", synthesize_profile(p));

  const TwoStageResult r = two_stage_search(inst.cluster, inst.profile, inst.workload, 16);
  const int dp = r.stage1.plan.dp;

  double best = r.stage1.cost.total;
  for (int tp0 = 1; tp0 <= 4; tp0 *= 2) {
    for (int tp1 = 1; tp1 <= 4; tp1 *= 2) {
      if (16 % (tp0 * dp) != 0 || 16 % (tp1 * dp) != 0) continue;
      for (int r0 = 0; r0 < 2; ++r0) {
        for (int r1 = 0; r1 < 2; ++r1) {
          const int pp0 = 16 / (tp0 * dp), pp1 = 16 / (tp1 * dp);
          for (int l0 = pp0; l0 < 16; l0 += pp0) {
            ParallelPlan plan{dp, 8 / dp, {{"T", pp0, tp0, r0 == 1, l0}, {"T", pp1, tp1, r1 == 1, 16 - l0}}};
            if ((16 - l0) % pp1 != 0) continue;
            if (!check_plan_feasibility(plan, inst.cluster, inst.profile, inst.workload)) continue;
            const double t = estimate_iteration_time(plan, inst.profile, inst.workload).total;
            if (tp0 >= tp1) best = std::min(best, t);
          }
        }
      }
    }
  }
  EXPECT_EQ(r.best.cost.total, best);
  for (std::size_t g = 1; g < r.best.plan.groups.size(); ++g) {
    if (r.best.plan.groups[g].chip == r.best.plan.groups[g - 1].chip) {
      EXPECT_LE(r.best.plan.groups[g].tp, r.best.plan.groups[g - 1].tp);
    }
  }
}

TEST(TwoStageSearch, CatalogueClusterWithinBudget) {
  const Instance inst = exp_b_instance();
  const TwoStageResult r = two_stage_search(inst.cluster, inst.profile, inst.workload, 128);
  EXPECT_LE(r.best.cost.total, r.stage1.cost.total);
  EXPECT_TRUE(check_plan_feasibility(r.best.plan, inst.cluster, inst.profile, inst.workload));
}

}  // namespace
}  // namespace heteropp
