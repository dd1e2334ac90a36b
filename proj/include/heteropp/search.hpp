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

// Depth-first plan search over (dp, per-group tp, per-group recompute) with
// exact layer sharding at every leaf, plus the two-stage refinement that splits
// each chip type into fixed-size groups.
//
// The DFS only discards candidates that are infeasible or whose sharding lower
// bound exceeds the incumbent, so the result is the global optimum of the cost
// model. Ties are broken by plan_preferred, which makes the answer independent
// of visit order and worker count.

#ifndef HETEROPP_SEARCH_HPP_
#define HETEROPP_SEARCH_HPP_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/cost_model.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/layer_sharding.hpp"
#include "heteropp/plan.hpp"
#include "heteropp/profile.hpp"

namespace heteropp {

/// (pp, tp) pairs with N = pp * tp * dp, tp a power of two <= tp_max, tp
/// ascending.
inline std::vector<std::pair<int, int>> feasible_tp_pp(const ChipTypeSpec& chip, int dp) {
  if (dp < 1) throw InputError("feasible_tp_pp: dp must be positive");
  std::vector<std::pair<int, int>> out;
  for (int tp = 1; tp <= chip.tp_max; tp *= 2) {
    const long long unit = static_cast<long long>(tp) * dp;
    if (chip.count % unit == 0) out.emplace_back(static_cast<int>(chip.count / unit), tp);
  }
  return out;
}

/// Divisors of B at which every chip type admits some (pp, tp), ascending.
inline std::vector<int> enumerate_dp(int global_batch, const ClusterSpec& cluster) {
  if (global_batch < 1) throw InputError("enumerate_dp: global batch must be positive");
  std::vector<int> out;
  for (int dp : divisors(global_batch)) {
    bool ok = true;
    for (const auto& c : cluster.chip_types) {
      if (feasible_tp_pp(c, dp).empty()) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(dp);
  }
  return out;
}

struct SearchOptions {
  int workers = 1;
};

struct SearchStats {
  long long configurations = 0;  // complete (dp, tp, r) leaves reached
  long long bound_pruned = 0;    // leaves skipped by the sharding lower bound
  long long sharded = 0;         // leaves that ran layer sharding
};

struct SearchResult {
  ParallelPlan plan;
  CostBreakdown cost;
  SearchStats stats;
};

namespace detail {

/// A block of chips searched as one stage group.
struct SearchUnit {
  std::string chip;
  int chips = 0;
  int tp_max = 1;
  double safe_memory = 0.0;
  const ChipProfile* profile = nullptr;
  bool tp_capped_by_previous = false;  // tp <= tp of the previous unit
};

struct UnitOption {
  int pp = 0;
  int tp = 1;
  bool recompute = false;
  ProfileEntry entry;
};

struct Candidate {
  double cost = std::numeric_limits<double>::infinity();
  ParallelPlan plan;
  bool valid = false;
};

/// Shared incumbent cost; only used to tighten pruning.
class Incumbent {
 public:
  double get() const { return value_.load(std::memory_order_relaxed); }
  void offer(double v) {
    double cur = value_.load(std::memory_order_relaxed);
    while (v < cur && !value_.compare_exchange_weak(cur, v, std::memory_order_relaxed)) {
    }
  }

 private:
  std::atomic<double> value_{std::numeric_limits<double>::infinity()};
};

class PlanSearch {
 public:
  PlanSearch(std::vector<SearchUnit> units, const WorkloadSpec& workload)
      : units_(std::move(units)), workload_(workload) {}

  /// Options of every unit at `dp`, in visit order: tp ascending, then
  /// recompute off before on.
  std::vector<std::vector<UnitOption>> options_for(int dp) const {
    std::vector<std::vector<UnitOption>> out(units_.size());
    for (std::size_t u = 0; u < units_.size(); ++u) {
      const SearchUnit& unit = units_[u];
      for (int tp = 1; tp <= unit.tp_max; tp *= 2) {
        const long long per = static_cast<long long>(tp) * dp;
        if (unit.chips % per != 0) continue;
        const int pp = static_cast<int>(unit.chips / per);
        if (pp > workload_.total_layers) continue;
        for (bool r : {false, true}) {
          auto e = unit.profile->find(dp, tp, r);
          if (!e) continue;
          out[u].push_back({pp, tp, r, *e});
        }
      }
    }
    return out;
  }

  /// Best plan with the given dp whose first unit uses option `first` (or any
  /// option when `first` is negative).
  Candidate run(int dp, const std::vector<std::vector<UnitOption>>& options, int first,
                Incumbent& incumbent, SearchStats& stats) const {
    Frame f{dp, workload_.global_batch / dp, options, incumbent, stats, {}, {}};
    f.chosen.resize(units_.size());
    // Smallest pp each remaining unit can take, for the stage-count bound.
    f.min_pp_rest.assign(units_.size() + 1, 0);
    for (std::size_t u = units_.size(); u-- > 0;) {
      int m = std::numeric_limits<int>::max();
      for (const auto& o : options[u]) m = std::min(m, o.pp);
      if (options[u].empty()) return {};
      f.min_pp_rest[u] = f.min_pp_rest[u + 1] + m;
    }
    Candidate best;
    if (first >= 0) {
      f.chosen[0] = &options[0][static_cast<std::size_t>(first)];
      if (f.chosen[0]->pp + f.min_pp_rest[1] > workload_.total_layers) return best;
      dfs(f, 1, f.chosen[0]->pp, best);
    } else {
      dfs(f, 0, 0, best);
    }
    return best;
  }

  const std::vector<SearchUnit>& units() const { return units_; }

 private:
  struct Frame {
    int dp;
    int microbatches;
    const std::vector<std::vector<UnitOption>>& options;
    Incumbent& incumbent;
    SearchStats& stats;
    std::vector<const UnitOption*> chosen;
    std::vector<int> min_pp_rest;
  };

  void dfs(Frame& f, std::size_t u, int stages, Candidate& best) const {
    if (u == units_.size()) {
      leaf(f, stages, best);
      return;
    }
    for (const auto& o : f.options[u]) {
      if (units_[u].tp_capped_by_previous && o.tp > f.chosen[u - 1]->tp) continue;
      if (stages + o.pp + f.min_pp_rest[u + 1] > workload_.total_layers) continue;
      f.chosen[u] = &o;
      dfs(f, u + 1, stages + o.pp, best);
    }
  }

  void leaf(Frame& f, int stages, Candidate& best) const {
    ++f.stats.configurations;
    ShardingProblem prob;
    prob.total_layers = workload_.total_layers;
    prob.microbatches = f.microbatches;
    prob.alpha = workload_.bubble_coefficient;
    prob.overhead = workload_.pipeline_overhead;
    prob.groups.resize(units_.size());
    int first = 1;
    for (std::size_t u = 0; u < units_.size(); ++u) {
      const UnitOption& o = *f.chosen[u];
      ShardingGroup& g = prob.groups[u];
      g.pp = o.pp;
      g.compute_per_layer =
          detail::per_layer_compute(o.entry.t_fwd, o.entry.t_bwd, o.entry.t_recomp, o.recompute);
      g.update_per_layer = o.entry.t_update;
      const int w = detail::in_flight(f.microbatches, stages, first);
      g.max_layers_per_stage = max_layers_within(units_[u].safe_memory, w, o.entry.mem_model,
                                                 o.entry.mem_act, workload_.total_layers);
      if (g.max_layers_per_stage < 1) return;
      first += o.pp;
    }
    const double cutoff = std::min(best.cost, f.incumbent.get());
    if (std::isfinite(cutoff) && sharding_lower_bound(prob) > cutoff * (1.0 + 1e-9)) {
      ++f.stats.bound_pruned;
      return;
    }
    ++f.stats.sharded;
    const EqualizedLayers init = equalize_layers(prob);
    auto r = refine_layers(prob, init.layers, cutoff);
    if (!r) return;

    ParallelPlan plan;
    plan.dp = f.dp;
    plan.microbatches = f.microbatches;
    plan.groups.reserve(units_.size());
    for (std::size_t u = 0; u < units_.size(); ++u) {
      const UnitOption& o = *f.chosen[u];
      plan.groups.push_back({units_[u].chip, o.pp, o.tp, o.recompute, r->layers[u]});
    }
    if (!best.valid || plan_preferred(r->cost, plan, best.cost, best.plan)) {
      best.cost = r->cost;
      best.plan = std::move(plan);
      best.valid = true;
      f.incumbent.offer(best.cost);
    }
  }

  std::vector<SearchUnit> units_;
  WorkloadSpec workload_;
};

inline void merge_stats(SearchStats& into, const SearchStats& s) {
  into.configurations += s.configurations;
  into.bound_pruned += s.bound_pruned;
  into.sharded += s.sharded;
}

/// Runs the search over every dp in `dps` and reduces deterministically.
inline std::optional<Candidate> run_search(const PlanSearch& search, const std::vector<int>& dps,
                                           int workers, SearchStats& stats) {
  struct Task {
    int dp;
    int first;  // option of unit 0, -1 for all
    std::size_t options_index;
  };
  std::vector<std::vector<std::vector<UnitOption>>> options;
  std::vector<Task> tasks;
  for (int dp : dps) {
    options.push_back(search.options_for(dp));
    const std::size_t idx = options.size() - 1;
    if (workers > 1 && dps.size() < static_cast<std::size_t>(workers)) {
      // Few dp candidates: split on the first unit's options as well.
      for (std::size_t k = 0; k < options[idx][0].size(); ++k) {
        tasks.push_back({dp, static_cast<int>(k), idx});
      }
    } else {
      tasks.push_back({dp, -1, idx});
    }
  }

  Incumbent incumbent;
  std::vector<Candidate> results(tasks.size());
  std::vector<SearchStats> task_stats(tasks.size());
  auto work = [&](std::size_t t) {
    const Task& task = tasks[t];
    results[t] =
        search.run(task.dp, options[task.options_index], task.first, incumbent, task_stats[t]);
  };
  if (workers <= 1 || tasks.size() <= 1) {
    for (std::size_t t = 0; t < tasks.size(); ++t) work(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(workers), tasks.size());
    for (std::size_t w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < tasks.size(); t = next.fetch_add(1)) work(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::optional<Candidate> best;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    merge_stats(stats, task_stats[t]);
    const Candidate& c = results[t];
    if (!c.valid) continue;
    if (!best || plan_preferred(c.cost, c.plan, best->cost, best->plan)) best = c;
  }
  return best;
}

inline std::vector<SearchUnit> units_per_type(const ClusterSpec& cluster,
                                              const ProfileTable& profile) {
  std::vector<SearchUnit> units;
  for (const auto& c : cluster.chip_types) {
    const ChipProfile* p = profile.chip(c.name);
    if (p == nullptr) throw InputError("profile has no chip '" + c.name + "'");
    units.push_back({c.name, c.count, c.tp_max, c.safe_memory, p, false});
  }
  return units;
}

}  // namespace detail

/// Globally optimal plan under the cost and memory model. Every chip type hosts
/// at least one stage. Throws Infeasible("no feasible plan").
inline SearchResult search_plan(const ClusterSpec& cluster, const ProfileTable& profile,
                                const WorkloadSpec& workload, const SearchOptions& options = {}) {
  validate_workload(workload);
  detail::PlanSearch search(detail::units_per_type(cluster, profile), workload);
  SearchResult out;
  auto best =
      detail::run_search(search, enumerate_dp(workload.global_batch, cluster), options.workers,
                         out.stats);
  if (!best) throw Infeasible("no feasible plan");
  out.plan = std::move(best->plan);
  out.cost = estimate_iteration_time(out.plan, profile, workload);
  return out;
}

/// Splits each chip type into groups of `group_size` chips (the remainder forms
/// a final smaller group).
inline std::vector<int> split_into_groups(int count, int group_size) {
  if (group_size < 1) throw InputError("group size must be positive");
  std::vector<int> out;
  for (int left = count; left > 0; left -= group_size) out.push_back(std::min(left, group_size));
  return out;
}

struct TwoStageResult {
  SearchResult stage1;
  std::optional<SearchResult> stage2;  // absent when no grouped plan is feasible at stage-1 dp
  SearchResult best;
  bool used_stage2 = false;
};

/// Stage 1 fixes dp with search_plan. Stage 2 re-runs the DFS at that dp with
/// each type split into groups, requiring non-increasing tp across groups of
/// one type, and keeps the strictly cheaper of the two plans.
inline TwoStageResult two_stage_search(const ClusterSpec& cluster, const ProfileTable& profile,
                                       const WorkloadSpec& workload, int group_size,
                                       const SearchOptions& options = {}) {
  TwoStageResult out;
  out.stage1 = search_plan(cluster, profile, workload, options);
  out.best = out.stage1;

  std::vector<detail::SearchUnit> units;
  for (const auto& base : detail::units_per_type(cluster, profile)) {
    bool first = true;
    for (int n : split_into_groups(base.chips, group_size)) {
      detail::SearchUnit u = base;
      u.chips = n;
      u.tp_capped_by_previous = !first;
      units.push_back(u);
      first = false;
    }
  }
  detail::PlanSearch search(std::move(units), workload);
  SearchStats stats;
  auto best = detail::run_search(search, {out.stage1.plan.dp}, options.workers, stats);
  if (best) {
    SearchResult r;
    r.plan = std::move(best->plan);
    r.cost = estimate_iteration_time(r.plan, profile, workload);
    r.stats = stats;
    out.stage2 = r;
    if (r.cost.total < out.stage1.cost.total) {
      out.best = r;
      out.used_stage2 = true;
    }
  }
  return out;
}

}  // namespace heteropp

#endif  // HETEROPP_SEARCH_HPP_
