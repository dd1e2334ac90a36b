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

// Non-uniform layer sharding across stage groups for a fixed (dp, pp, tp, r)
// configuration.
//
// equalize_layers balances per-stage compute time in the continuum and rounds.
// refine_layers turns that into the best integer split: a steepest-descent pass
// over whole-stage moves gives an incumbent, then a depth-first branch and
// bound over layers-per-stage certifies (or improves) it. Writing
// x_i = layers per stage and k_i = (b - alpha) c_i + u_i, the iteration time
// decomposes as
//
//   T(x) = alpha * sum_i pp_i c_i x_i + max_i k_i x_i,
//
// which gives cheap lower bounds on partial assignments: a greedy fill for the
// linear part and a water-filling bound for the max.

#ifndef HETEROPP_LAYER_SHARDING_HPP_
#define HETEROPP_LAYER_SHARDING_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/cost_model.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/plan.hpp"
#include "heteropp/profile.hpp"

namespace heteropp {

struct ShardingGroup {
  int pp = 1;
  double compute_per_layer = 0.0;  // t_fwd + t_bwd + r * t_recomp
  double update_per_layer = 0.0;   // t_update(dp, tp)
  int max_layers_per_stage = 0;    // memory cap at the group's first stage
};

struct ShardingProblem {
  int total_layers = 0;
  int microbatches = 1;
  double alpha = 1.0;
  double overhead = 0.0;
  std::vector<ShardingGroup> groups;
};

struct ShardingResult {
  std::vector<int> layers;  // per group, multiples of pp
  double cost = 0.0;
};

/// Iteration time of a layers-per-stage vector. Bit-identical to
/// estimate_iteration_time on the corresponding plan.
inline double sharding_cost(const ShardingProblem& prob, std::span<const int> per_stage) {
  std::vector<detail::GroupTerms> terms(prob.groups.size());
  for (std::size_t i = 0; i < prob.groups.size(); ++i) {
    const auto& g = prob.groups[i];
    terms[i] = {g.pp, detail::scaled(per_stage[i], g.compute_per_layer),
                detail::scaled(per_stage[i], g.update_per_layer)};
  }
  return detail::pipeline_time(terms, prob.microbatches, prob.alpha, prob.overhead);
}

/// Largest layers-per-stage whose stage memory fits in `safe`, capped at
/// `limit`. Zero when even one layer does not fit.
inline int max_layers_within(double safe, int in_flight, double mem_model, double mem_act,
                             int limit) {
  const double per_layer = mem_model + in_flight * mem_act;
  double guess = std::floor(safe / per_layer);
  int x = guess >= limit ? limit : std::max(0, static_cast<int>(guess));
  while (x < limit && detail::stage_memory(x + 1, in_flight, mem_model, mem_act) <= safe) ++x;
  while (x > 0 && detail::stage_memory(x, in_flight, mem_model, mem_act) > safe) --x;
  return x;
}

struct EqualizedLayers {
  std::vector<double> ideal;  // real-valued l_i with equal per-stage compute
  std::vector<int> layers;    // integerized, multiples of pp_i
  bool sums_to_total = false;
};

/// Initial split equalizing per-stage compute: tau = L / sum_i(pp_i / c_i),
/// l_i = pp_i * round(tau / c_i), then whole-stage corrections toward L.
inline EqualizedLayers equalize_layers(const ShardingProblem& prob) {
  const auto& gs = prob.groups;
  if (gs.empty()) throw InputError("equalize_layers: no groups");
  long long stages = 0;
  double inv = 0.0;
  for (const auto& g : gs) {
    if (g.pp < 1 || !(g.compute_per_layer > 0.0)) {
      throw InputError("equalize_layers: groups need pp >= 1 and positive compute");
    }
    stages += g.pp;
    inv += g.pp / g.compute_per_layer;
  }
  if (prob.total_layers < stages) {
    throw Infeasible("equalize_layers: L=" + std::to_string(prob.total_layers) + " < " +
                     std::to_string(stages) + " stages");
  }
  const double tau = prob.total_layers / inv;

  EqualizedLayers out;
  std::vector<int> x(gs.size());
  long long sum = 0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const double ideal_x = tau / gs[i].compute_per_layer;
    out.ideal.push_back(gs[i].pp * ideal_x);
    x[i] = std::max(1, static_cast<int>(std::lround(ideal_x)));
    sum += static_cast<long long>(gs[i].pp) * x[i];
  }
  // Overshoot: take a stage-layer from the slowest group. Undershoot: give one
  // to the group that stays fastest.
  while (sum > prob.total_layers) {
    std::size_t pick = gs.size();
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (x[i] <= 1) continue;
      if (pick == gs.size() ||
          x[i] * gs[i].compute_per_layer >= x[pick] * gs[pick].compute_per_layer) {
        pick = i;
      }
    }
    if (pick == gs.size()) break;
    --x[pick];
    sum -= gs[pick].pp;
  }
  while (sum < prob.total_layers) {
    std::size_t pick = gs.size();
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (sum + gs[i].pp > prob.total_layers) continue;
      if (pick == gs.size() ||
          (x[i] + 1) * gs[i].compute_per_layer < (x[pick] + 1) * gs[pick].compute_per_layer) {
        pick = i;
      }
    }
    if (pick == gs.size()) break;
    ++x[pick];
    sum += gs[pick].pp;
  }
  for (std::size_t i = 0; i < gs.size(); ++i) out.layers.push_back(x[i] * gs[i].pp);
  out.sums_to_total = sum == prob.total_layers;
  return out;
}

namespace detail {

/// (cost, x) ordering: lower cost, then more layers on earlier groups.
inline bool sharding_better(double cost, std::span<const int> x, double best_cost,
                            std::span<const int> best_x) {
  if (cost != best_cost) return cost < best_cost;
  return std::lexicographical_compare(best_x.begin(), best_x.end(), x.begin(), x.end());
}

class ShardingSearch {
 public:
  ShardingSearch(const ShardingProblem& prob, double cutoff) : prob_(prob), cutoff_(cutoff) {
    const std::size_t n = prob.groups.size();
    slope_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& g = prob.groups[i];
      slope_[i] = (prob.microbatches - prob.alpha) * g.compute_per_layer + g.update_per_layer;
    }
    min_rest_.assign(n + 1, 0);
    max_rest_.assign(n + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
      const auto& g = prob.groups[i];
      min_rest_[i] = min_rest_[i + 1] + g.pp;
      max_rest_[i] = max_rest_[i + 1] + static_cast<long long>(g.pp) * g.max_layers_per_stage;
    }
    // Groups of each suffix sorted by compute cost, for the greedy bound.
    by_cost_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) by_cost_[i].push_back(j);
      std::stable_sort(by_cost_[i].begin(), by_cost_[i].end(), [&](std::size_t a, std::size_t b) {
        return prob.groups[a].compute_per_layer < prob.groups[b].compute_per_layer;
      });
    }
    x_.assign(n, 0);
  }

  bool feasible_at_all() const {
    for (const auto& g : prob_.groups) {
      if (g.max_layers_per_stage < 1) return false;
    }
    return min_rest_[0] <= prob_.total_layers && prob_.total_layers <= max_rest_[0];
  }

  /// Lower bound on T over all completions from group `i` with `remaining`
  /// layers left to place.
  double bound(std::size_t i, long long remaining, double linear_part, double max_part) const {
    const std::size_t n = prob_.groups.size();
    if (i == n) return prob_.alpha * linear_part + max_part + prob_.overhead;
    double linear = linear_part;
    long long extra = remaining - min_rest_[i];
    for (std::size_t j = i; j < n; ++j) {
      linear += prob_.groups[j].pp * prob_.groups[j].compute_per_layer;
    }
    for (std::size_t j : by_cost_[i]) {
      if (extra <= 0) break;
      const auto& g = prob_.groups[j];
      const long long room = static_cast<long long>(g.pp) * (g.max_layers_per_stage - 1);
      const long long take = std::min(room, extra);
      linear += take * g.compute_per_layer;
      extra -= take;
    }
    double max_rest = -std::numeric_limits<double>::infinity();
    bool all_positive = true;
    double weight = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      if (!(slope_[j] > 0.0)) {
        all_positive = false;
        break;
      }
      weight += prob_.groups[j].pp / slope_[j];
      max_rest = std::max(max_rest, slope_[j]);
    }
    if (all_positive) {
      max_rest = std::max(max_rest, static_cast<double>(remaining) / weight);
    } else {
      max_rest = -std::numeric_limits<double>::infinity();
    }
    return prob_.alpha * linear + std::max(max_part, max_rest) + prob_.overhead;
  }

  void seed(std::span<const int> per_stage) {
    const double c = sharding_cost(prob_, per_stage);
    if (!have_best_ || sharding_better(c, per_stage, best_cost_, best_x_)) {
      best_cost_ = c;
      best_x_.assign(per_stage.begin(), per_stage.end());
      have_best_ = true;
    }
  }

  void run() {
    if (!feasible_at_all()) return;
    dfs(0, prob_.total_layers, 0.0, -std::numeric_limits<double>::infinity());
  }

  bool found() const { return have_best_; }
  double best_cost() const { return best_cost_; }
  const std::vector<int>& best_x() const { return best_x_; }
  long long nodes() const { return nodes_; }

 private:
  double threshold() const {
    const double t = have_best_ ? std::min(best_cost_, cutoff_) : cutoff_;
    return std::isfinite(t) ? t * (1.0 + 1e-9) : t;
  }

  void dfs(std::size_t i, long long remaining, double linear_part, double max_part) {
    ++nodes_;
    const std::size_t n = prob_.groups.size();
    const auto& g = prob_.groups[i];
    if (i + 1 == n) {
      if (remaining % g.pp != 0) return;
      const long long x = remaining / g.pp;
      if (x < 1 || x > g.max_layers_per_stage) return;
      x_[i] = static_cast<int>(x);
      const double c = sharding_cost(prob_, x_);
      if (c <= threshold() && (!have_best_ || sharding_better(c, x_, best_cost_, best_x_))) {
        best_cost_ = c;
        best_x_ = x_;
        have_best_ = true;
      }
      return;
    }
    long long hi = (remaining - min_rest_[i + 1]) / g.pp;
    hi = std::min<long long>(hi, g.max_layers_per_stage);
    long long lo = 1;
    const long long need = remaining - max_rest_[i + 1];
    if (need > 0) lo = std::max<long long>(lo, (need + g.pp - 1) / g.pp);
    // Descending so that ties resolve toward more layers on earlier groups.
    for (long long x = hi; x >= lo; --x) {
      const double lin = linear_part + g.pp * g.compute_per_layer * static_cast<double>(x);
      const double mx = std::max(max_part, slope_[i] * static_cast<double>(x));
      const long long rest = remaining - g.pp * x;
      if (bound(i + 1, rest, lin, mx) > threshold()) continue;
      x_[i] = static_cast<int>(x);
      dfs(i + 1, rest, lin, mx);
    }
  }

  const ShardingProblem& prob_;
  double cutoff_;
  std::vector<double> slope_;
  std::vector<long long> min_rest_, max_rest_;
  std::vector<std::vector<std::size_t>> by_cost_;
  std::vector<int> x_;
  std::vector<int> best_x_;
  double best_cost_ = std::numeric_limits<double>::infinity();
  bool have_best_ = false;
  long long nodes_ = 0;
};

inline bool valid_split(const ShardingProblem& prob, std::span<const int> layers) {
  if (layers.size() != prob.groups.size()) return false;
  long long sum = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& g = prob.groups[i];
    if (layers[i] % g.pp != 0) return false;
    const int x = layers[i] / g.pp;
    if (x < 1 || x > g.max_layers_per_stage) return false;
    sum += layers[i];
  }
  return sum == prob.total_layers;
}

/// Steepest descent over moves of lcm(pp_i, pp_j) layers from group i to j.
inline std::vector<int> steepest_descent(const ShardingProblem& prob, std::vector<int> x) {
  const std::size_t n = prob.groups.size();
  double cost = sharding_cost(prob, x);
  for (;;) {
    double best = cost;
    std::vector<int> best_x;
    // Destinations in ascending index order: earlier groups win ties.
    for (std::size_t to = 0; to < n; ++to) {
      for (std::size_t from = 0; from < n; ++from) {
        if (from == to) continue;
        const int a = prob.groups[from].pp, b = prob.groups[to].pp;
        const int moved = std::lcm(a, b);
        std::vector<int> y = x;
        y[from] -= moved / a;
        y[to] += moved / b;
        if (y[from] < 1 || y[to] > prob.groups[to].max_layers_per_stage) continue;
        const double c = sharding_cost(prob, y);
        if (c < best) {
          best = c;
          best_x = std::move(y);
        }
      }
    }
    if (best_x.empty()) return x;
    x = std::move(best_x);
    cost = best;
  }
}

}  // namespace detail

/// Best integer split reachable from `initial`: each l_i a positive multiple of
/// pp_i within the memory cap, sum equal to L, minimal iteration time, ties
/// toward more layers on earlier groups. Returns nullopt when no split is
/// feasible or, with a finite `cutoff`, when none costs at most `cutoff`.
inline std::optional<ShardingResult> refine_layers(
    const ShardingProblem& prob, std::span<const int> initial,
    double cutoff = std::numeric_limits<double>::infinity()) {
  detail::ShardingSearch search(prob, cutoff);
  if (!search.feasible_at_all()) return std::nullopt;
  if (detail::valid_split(prob, initial)) {
    std::vector<int> x(initial.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = initial[i] / prob.groups[i].pp;
    search.seed(detail::steepest_descent(prob, std::move(x)));
  }
  search.run();
  if (!search.found() || search.best_cost() > cutoff) return std::nullopt;
  ShardingResult out;
  for (std::size_t i = 0; i < prob.groups.size(); ++i) {
    out.layers.push_back(search.best_x()[i] * prob.groups[i].pp);
  }
  out.cost = search.best_cost();
  return out;
}

/// Lower bound on the best split's cost, or +inf when no split can exist.
inline double sharding_lower_bound(const ShardingProblem& prob) {
  detail::ShardingSearch search(prob, std::numeric_limits<double>::infinity());
  if (!search.feasible_at_all()) return std::numeric_limits<double>::infinity();
  return search.bound(0, prob.total_layers, 0.0, -std::numeric_limits<double>::infinity());
}

/// Builds the sharding problem of a plan skeleton (groups with chip, pp, tp,
/// recompute set; layers ignored). Memory caps use each group's first stage,
/// which holds the most in-flight microbatches.
inline ShardingProblem make_sharding_problem(const ParallelPlan& skeleton,
                                             const ClusterSpec& cluster,
                                             const ProfileTable& profile,
                                             const WorkloadSpec& workload) {
  ShardingProblem prob;
  prob.total_layers = workload.total_layers;
  prob.microbatches = skeleton.microbatches;
  prob.alpha = workload.bubble_coefficient;
  prob.overhead = workload.pipeline_overhead;
  const int stages = skeleton.num_stages();
  for (std::size_t i = 0; i < skeleton.groups.size(); ++i) {
    const StageGroup& g = skeleton.groups[i];
    if (g.pp < 1) throw InputError("sharding: group on chip '" + g.chip + "' has pp < 1");
    const ChipTypeSpec* spec = cluster.find(g.chip);
    if (spec == nullptr) throw InputError("sharding: unknown chip '" + g.chip + "'");
    const ProfileEntry e = lookup_profile(profile, g.chip, skeleton.dp, g.tp, g.recompute);
    ShardingGroup sg;
    sg.pp = g.pp;
    sg.compute_per_layer = detail::per_layer_compute(e.t_fwd, e.t_bwd, e.t_recomp, g.recompute);
    sg.update_per_layer = e.t_update;
    const int w = detail::in_flight(skeleton.microbatches, stages, skeleton.first_stage(i));
    sg.max_layers_per_stage =
        max_layers_within(spec->safe_memory, w, e.mem_model, e.mem_act, workload.total_layers);
    prob.groups.push_back(sg);
  }
  return prob;
}

/// Plan-level equalization: per-group layer totals for a skeleton.
inline EqualizedLayers equalize_layers(const ParallelPlan& skeleton, const ClusterSpec& cluster,
                                       const ProfileTable& profile, const WorkloadSpec& workload) {
  return equalize_layers(make_sharding_problem(skeleton, cluster, profile, workload));
}

/// Plan-level refinement: returns the skeleton with layers filled in. Throws
/// Infeasible("sharding infeasible") when no memory-feasible split exists.
inline ParallelPlan refine_layers(const ParallelPlan& skeleton, std::span<const int> initial,
                                  const ClusterSpec& cluster, const ProfileTable& profile,
                                  const WorkloadSpec& workload) {
  const ShardingProblem prob = make_sharding_problem(skeleton, cluster, profile, workload);
  auto r = refine_layers(prob, initial);
  if (!r) throw Infeasible("sharding infeasible");
  ParallelPlan out = skeleton;
  for (std::size_t i = 0; i < out.groups.size(); ++i) out.groups[i].layers = r->layers[i];
  return out;
}

}  // namespace heteropp

#endif  // HETEROPP_LAYER_SHARDING_HPP_
