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

// Exhaustive reference search. Enumerates every dp dividing B, every
// power-of-two tp, every recompute flag and every integer layer split, and
// prices each complete plan with check_plan_feasibility and
// estimate_iteration_time. No bounds, no heuristics: slow by construction and
// only meant for small instances.

#ifndef HETEROPP_ORACLE_HPP_
#define HETEROPP_ORACLE_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/cost_model.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/plan.hpp"
#include "heteropp/profile.hpp"
#include "heteropp/search.hpp"

namespace heteropp {

struct OracleLimits {
  int max_chip_types = 3;
  int max_total_chips = 256;
  int max_layers = 64;
};

namespace detail {

class Exhaustive {
 public:
  Exhaustive(const ClusterSpec& cluster, const ProfileTable& profile,
             const WorkloadSpec& workload)
      : cluster_(cluster), profile_(profile), workload_(workload) {}

  std::optional<SearchResult> run() {
    for (int dp : divisors(workload_.global_batch)) {
      plan_.dp = dp;
      plan_.microbatches = workload_.global_batch / dp;
      plan_.groups.assign(cluster_.chip_types.size(), StageGroup{});
      choose_type(0);
    }
    if (!have_) return std::nullopt;
    return best_;
  }

  long long plans_evaluated() const { return evaluated_; }

 private:
  void choose_type(std::size_t i) {
    if (i == cluster_.chip_types.size()) {
      choose_layers(0, workload_.total_layers);
      return;
    }
    const ChipTypeSpec& c = cluster_.chip_types[i];
    for (int tp = 1; tp <= c.tp_max; tp *= 2) {
      const long long per = static_cast<long long>(tp) * plan_.dp;
      if (c.count % per != 0) continue;
      for (bool r : {false, true}) {
        plan_.groups[i] = StageGroup{c.name, static_cast<int>(c.count / per), tp, r, 0};
        choose_type(i + 1);
      }
    }
  }

  void choose_layers(std::size_t i, int remaining) {
    const std::size_t n = plan_.groups.size();
    StageGroup& g = plan_.groups[i];
    if (i + 1 == n) {
      g.layers = remaining;
      evaluate();
      return;
    }
    for (int l = g.pp; l <= remaining; l += g.pp) {
      g.layers = l;
      choose_layers(i + 1, remaining - l);
    }
  }

  void evaluate() {
    ++evaluated_;
    if (!check_plan_feasibility(plan_, cluster_, profile_, workload_)) return;
    CostBreakdown cost = estimate_iteration_time(plan_, profile_, workload_);
    if (!have_ || plan_preferred(cost.total, plan_, best_.cost.total, best_.plan)) {
      best_.plan = plan_;
      best_.cost = std::move(cost);
      have_ = true;
    }
  }

  const ClusterSpec& cluster_;
  const ProfileTable& profile_;
  const WorkloadSpec& workload_;
  ParallelPlan plan_;
  SearchResult best_;
  bool have_ = false;
  long long evaluated_ = 0;
};

}  // namespace detail

/// Globally optimal plan by exhaustive enumeration. Throws InputError when the
/// instance exceeds `limits` and Infeasible("no feasible plan") when nothing
/// fits.
inline SearchResult brute_force_oracle(const ClusterSpec& cluster, const ProfileTable& profile,
                                       const WorkloadSpec& workload,
                                       const OracleLimits& limits = {}) {
  validate_workload(workload);
  if (static_cast<int>(cluster.chip_types.size()) > limits.max_chip_types ||
      cluster.total_chips() > limits.max_total_chips ||
      workload.total_layers > limits.max_layers) {
    throw InputError("instance exceeds oracle limits");
  }
  detail::Exhaustive ex(cluster, profile, workload);
  auto best = ex.run();
  if (!best) throw Infeasible("no feasible plan");
  best->stats.configurations = ex.plans_evaluated();
  return *best;
}

}  // namespace heteropp

#endif  // HETEROPP_ORACLE_HPP_
