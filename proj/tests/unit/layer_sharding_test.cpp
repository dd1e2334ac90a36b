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

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace heteropp {
namespace {

ShardingProblem problem(int L, int b, std::vector<ShardingGroup> groups, double alpha = 1.0) {
  return ShardingProblem{L, b, alpha, 0.0, std::move(groups)};
}

// Straight evaluation of the iteration time of a per-group layer vector.
double direct_cost(const ShardingProblem& p, const std::vector<int>& layers) {
  std::vector<double> comp, upd;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const int lps = layers[i] / p.groups[i].pp;
    for (int k = 0; k < p.groups[i].pp; ++k) {
      comp.push_back(lps * p.groups[i].compute_per_layer);
      upd.push_back(lps * p.groups[i].update_per_layer);
    }
  }
  double total = 0.0, worst = 0.0;
  for (double c : comp) total += c;
  for (std::size_t s = 0; s < comp.size(); ++s) {
    worst = std::max(worst, p.microbatches * comp[s] + upd[s] + p.alpha * (total - comp[s]));
  }
  return worst + p.overhead;
}

struct Brute {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> layers;
};

// Every split into positive multiples of pp_i within the caps.
Brute brute_force(const ShardingProblem& p) {
  Brute best;
  std::vector<int> cur(p.groups.size());
  auto rec = [&](auto&& self, std::size_t i, int left) -> void {
    const auto& g = p.groups[i];
    if (i + 1 == p.groups.size()) {
      if (left < g.pp || left % g.pp != 0 || left / g.pp > g.max_layers_per_stage) return;
      cur[i] = left;
      const double c = direct_cost(p, cur);
      if (c < best.cost) {
        best.cost = c;
        best.layers = cur;
      }
      return;
    }
    for (int l = g.pp; l <= left && l / g.pp <= g.max_layers_per_stage; l += g.pp) {
      cur[i] = l;
      self(self, i + 1, left - l);
    }
  };
  rec(rec, 0, p.total_layers);
  return best;
}

constexpr int kNoCap = 1 << 20;

TEST(EqualizeLayers, BalancesComputeAcrossTypes) {
  const auto p = problem(18, 4, {{2, 2e-3, 0.0, kNoCap}, {2, 1e-3, 0.0, kNoCap}});
  const EqualizedLayers e = equalize_layers(p);
  EXPECT_EQ(e.layers, (std::vector<int>{6, 12}));
  EXPECT_TRUE(e.sums_to_total);
  EXPECT_NEAR(e.ideal[0], 6.0, 1e-12);
  EXPECT_NEAR(e.ideal[1], 12.0, 1e-12);
}

TEST(EqualizeLayers, SymmetricAndHomogeneous) {
  EXPECT_EQ(equalize_layers(problem(16, 4, {{2, 1.0, 0.0, kNoCap}, {2, 1.0, 0.0, kNoCap}})).layers,
            (std::vector<int>{8, 8}));
  EXPECT_EQ(equalize_layers(problem(18, 4, {{3, 1.0, 0.0, kNoCap}})).layers, std::vector<int>{18});
}

TEST(EqualizeLayers, OutputIsWholeStagesSummingToL) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<ShardingGroup> gs;
    int stages = 0;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
      const int pp = 1 + static_cast<int>(rng() % 5);
      stages += pp;
      gs.push_back({pp, 0.1 + (rng() % 100) / 10.0, 0.0, kNoCap});
    }
    const int L = stages + static_cast<int>(rng() % 40);
    const EqualizedLayers e = equalize_layers(problem(L, 4, gs));
    int sum = 0;
    for (std::size_t i = 0; i < gs.size(); ++i) {
      EXPECT_EQ(e.layers[i] % gs[i].pp, 0);
      EXPECT_GE(e.layers[i], gs[i].pp);
      sum += e.layers[i];
    }
    if (e.sums_to_total) {
      EXPECT_EQ(sum, L);
    }
  }
}

TEST(EqualizeLayers, TooFewLayers) {
  EXPECT_THROW(equalize_layers(problem(3, 4, {{2, 1.0, 0.0, kNoCap}, {2, 1.0, 0.0, kNoCap}})),
               Infeasible);
}

TEST(RefineLayers, MovesWholeStageToTheCheaperSide) {
  const auto p = problem(18, 4, {{2, 2e-3, 1e-4, kNoCap}, {2, 1e-3, 1e-4, kNoCap}});
  const std::vector<int> initial{8, 12};
  const auto r = refine_layers(p, initial);
  ASSERT_TRUE(r);
  const Brute b = brute_force(p);
  EXPECT_EQ(r->layers, b.layers);
  EXPECT_TRUE(testing::near_rel(r->cost, b.cost, 1e-12));
}

TEST(RefineLayers, OptimalInputIsAFixedPoint) {
  const auto p = problem(18, 4, {{2, 2e-3, 0.0, kNoCap}, {2, 1e-3, 0.0, kNoCap}});
  const std::vector<int> initial{6, 12};
  const auto r = refine_layers(p, initial);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->layers, initial);
}

TEST(RefineLayers, MemoryCapOverridesTimeBalance) {
  // Type 0 is fast and would take most layers, but holds 3 per stage at most.
  const auto p = problem(24, 8, {{2, 1e-3, 0.0, 3}, {2, 4e-3, 0.0, kNoCap}});
  const auto r = refine_layers(p, equalize_layers(p).layers);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->layers, (std::vector<int>{6, 18}));
  EXPECT_EQ(r->layers, brute_force(p).layers);
}

TEST(RefineLayers, NoFeasibleSplit) {
  const auto p = problem(24, 8, {{2, 1e-3, 0.0, 3}, {2, 4e-3, 0.0, 3}});
  EXPECT_FALSE(refine_layers(p, equalize_layers(p).layers));
}

TEST(RefineLayers, HomogeneousIsUniform) {
  for (int pp = 1; pp <= 6; ++pp) {
    const auto p = problem(pp * 5, 4, {{pp, 1e-2, 1e-3, kNoCap}});
    const auto r = refine_layers(p, equalize_layers(p).layers);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->layers, std::vector<int>{pp * 5});
  }
}

TEST(RefineLayers, MatchesExhaustiveSplits) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> c(1e-3, 1e-1);
  int compared = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    std::vector<ShardingGroup> gs;
    int stages = 0;
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
      const int pp = 1 + static_cast<int>(rng() % 4);
      stages += pp;
      const int cap = rng() % 3 == 0 ? 1 + static_cast<int>(rng() % 12) : kNoCap;
      gs.push_back({pp, c(rng), c(rng) * 0.2, cap});
    }
    const int L = stages + static_cast<int>(rng() % 50);
    const double alpha = (rng() % 3) * 0.5;
    const auto p = problem(std::min(L, 64), 1 + static_cast<int>(rng() % 16), gs, alpha);
    if (p.total_layers < stages) continue;
    const Brute b = brute_force(p);
    std::optional<ShardingResult> r;
    try {
      r = refine_layers(p, equalize_layers(p).layers);
    } catch (const Infeasible&) {
    }
    if (b.layers.empty()) {
      EXPECT_FALSE(r);
      continue;
    }
    ASSERT_TRUE(r) << "trial " << trial;
    EXPECT_TRUE(testing::near_rel(r->cost, b.cost, 1e-12)) << "trial " << trial;
    EXPECT_EQ(r->cost, sharding_cost(p, [&] {
                std::vector<int> lps;
                for (std::size_t i = 0; i < gs.size(); ++i) lps.push_back(r->layers[i] / gs[i].pp);
                return lps;
              }()));
    EXPECT_LE(sharding_lower_bound(p), r->cost * (1 + 1e-12));
    ++compared;
  }
  EXPECT_GT(compared, 1000);
}

TEST(MaxLayersWithin, FitsExactly) {
  // 1 GB model + 2 * 0.5 GB activations per layer; 10 GB fits 5 layers.
  EXPECT_EQ(max_layers_within(10.0, 2, 1.0, 0.5, 100), 5);
  EXPECT_EQ(max_layers_within(10.0, 2, 1.0, 0.5, 3), 3);
  EXPECT_EQ(max_layers_within(1.5, 2, 1.0, 0.5, 100), 0);
}

}  // namespace
}  // namespace heteropp
