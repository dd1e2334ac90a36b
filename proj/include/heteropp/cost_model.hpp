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

// Analytic iteration-time and memory model of a heterogeneous 1F1B pipeline.
//
// For stage s with per-microbatch compute T_s^comp and optimizer time
// T_s^update, the iteration time is
//
//   T = max_s ( b * T_s^comp + T_s^update + alpha * sum_{j != s} T_j^comp )
//
// and the peak memory of stage s holding lps layers is
//
//   lps * mem_model + min(b, s_pp - s + 1) * lps * mem_act.
//
// The search evaluates thousands of candidates through the same detail::
// kernels, so any plan it returns prices identically here.

#ifndef HETEROPP_COST_MODEL_HPP_
#define HETEROPP_COST_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/plan.hpp"
#include "heteropp/profile.hpp"

namespace heteropp {

namespace detail {

/// Per-stage terms shared by every stage of a group.
struct GroupTerms {
  int pp = 0;
  double compute = 0.0;  // T^comp of one stage
  double update = 0.0;   // T^update of one stage
};

inline double per_layer_compute(double fwd, double bwd, double recomp, bool recompute) {
  return fwd + bwd + (recompute ? recomp : 0.0);
}

inline double scaled(int layers_per_stage, double per_layer) {
  return static_cast<double>(layers_per_stage) * per_layer;
}

inline double compute_sum(std::span<const GroupTerms> groups) {
  double sum = 0.0;
  for (const auto& g : groups) sum += static_cast<double>(g.pp) * g.compute;
  return sum;
}

inline double bubble(double alpha, double sum, const GroupTerms& g) {
  return alpha * (sum - g.compute);
}

inline double stage_total(int microbatches, double alpha, double sum, const GroupTerms& g) {
  return static_cast<double>(microbatches) * g.compute + g.update + bubble(alpha, sum, g);
}

inline double pipeline_time(std::span<const GroupTerms> groups, int microbatches, double alpha,
                            double overhead) {
  const double sum = compute_sum(groups);
  double worst = 0.0;
  for (const auto& g : groups) worst = std::max(worst, stage_total(microbatches, alpha, sum, g));
  return worst + overhead;
}

/// 1F1B in-flight microbatches at a 1-based stage.
inline int in_flight(int microbatches, int num_stages, int stage) {
  return std::min(microbatches, num_stages - stage + 1);
}

inline double stage_memory(int layers_per_stage, int in_flight_count, double mem_model,
                           double mem_act) {
  const double lps = static_cast<double>(layers_per_stage);
  return lps * mem_model + static_cast<double>(in_flight_count) * lps * mem_act;
}

}  // namespace detail

/// T^comp of one stage: lps * (t_fwd + t_bwd + r * t_recomp).
inline double stage_compute_time(const ProfileTable& profile, const std::string& chip, int tp,
                                 int layers_per_stage, bool recompute) {
  if (layers_per_stage < 1) throw InputError("layers_per_stage must be at least 1");
  const ChipProfile* p = profile.chip(chip);
  if (p == nullptr) throw InputError("profile has no chip '" + chip + "'");
  if (!is_power_of_two(tp) || tp > p->tp_max) {
    throw InputError("tp " + std::to_string(tp) + " invalid for chip '" + chip + "'");
  }
  auto t = p->times.find(tp);
  if (t == p->times.end()) {
    throw ProfileEntryAbsent("profile entry absent (chip=" + chip + ", tp=" + std::to_string(tp) +
                             ") in layer-time table");
  }
  return detail::scaled(layers_per_stage, detail::per_layer_compute(t->second.fwd, t->second.bwd,
                                                                    t->second.recomp, recompute));
}

/// T^update of one stage: lps * t_update(dp, tp).
inline double stage_update_time(const ProfileTable& profile, const std::string& chip, int dp,
                                int tp, int layers_per_stage) {
  if (layers_per_stage < 1) throw InputError("layers_per_stage must be at least 1");
  const ChipProfile* p = profile.chip(chip);
  if (p == nullptr) throw InputError("profile has no chip '" + chip + "'");
  auto u = p->update.find({dp, tp});
  if (u == p->update.end()) {
    throw ProfileEntryAbsent("profile entry absent (chip=" + chip + ", dp=" + std::to_string(dp) +
                             ", tp=" + std::to_string(tp) + ") in update table");
  }
  return detail::scaled(layers_per_stage, u->second);
}

struct StageCost {
  std::string chip;
  double compute_time = 0.0;
  double update_time = 0.0;
  double bubble_term = 0.0;
  double stage_total = 0.0;
};

struct CostBreakdown {
  std::vector<StageCost> stages;  // one per pipeline stage, head first
  double overhead = 0.0;
  double total = 0.0;

  /// 1-based indices of the stages attaining the maximum.
  std::vector<int> argmax_stages() const {
    std::vector<int> out;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& s : stages) worst = std::max(worst, s.stage_total);
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (stages[i].stage_total == worst) out.push_back(static_cast<int>(i) + 1);
    }
    return out;
  }
};

namespace detail {

inline std::vector<GroupTerms> group_terms(const ParallelPlan& plan, const ProfileTable& profile) {
  std::vector<GroupTerms> terms;
  terms.reserve(plan.groups.size());
  for (const auto& g : plan.groups) {
    if (g.pp < 1) throw InputError("group on chip '" + g.chip + "' has no stages");
    const int lps = g.layers / g.pp;
    terms.push_back({g.pp, stage_compute_time(profile, g.chip, g.tp, lps, g.recompute),
                     stage_update_time(profile, g.chip, plan.dp, g.tp, lps)});
  }
  return terms;
}

}  // namespace detail

/// Prices a plan. Layer counts that are not multiples of pp are rounded up
/// per stage.
inline CostBreakdown estimate_iteration_time(const ParallelPlan& plan, const ProfileTable& profile,
                                             const WorkloadSpec& workload) {
  if (plan.groups.empty()) throw InputError("plan has no stages");
  ParallelPlan rounded = plan;
  for (auto& g : rounded.groups) {
    if (g.pp >= 1 && g.layers % g.pp != 0) g.layers = (g.layers / g.pp + 1) * g.pp;
  }
  const auto terms = detail::group_terms(rounded, profile);
  const double sum = detail::compute_sum(terms);
  const double alpha = workload.bubble_coefficient;

  CostBreakdown out;
  double worst = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    StageCost sc;
    sc.chip = plan.groups[i].chip;
    sc.compute_time = terms[i].compute;
    sc.update_time = terms[i].update;
    sc.bubble_term = detail::bubble(alpha, sum, terms[i]);
    sc.stage_total = detail::stage_total(plan.microbatches, alpha, sum, terms[i]);
    worst = std::max(worst, sc.stage_total);
    for (int k = 0; k < terms[i].pp; ++k) out.stages.push_back(sc);
  }
  out.overhead = workload.pipeline_overhead;
  out.total = worst + workload.pipeline_overhead;
  return out;
}

/// Peak bytes on one chip of a 1-based stage.
inline double stage_peak_memory(const ParallelPlan& plan, int stage_index,
                                const ProfileTable& profile) {
  const int stages = plan.num_stages();
  if (stage_index < 1 || stage_index > stages) {
    throw InputError("stage index " + std::to_string(stage_index) + " out of range [1, " +
                     std::to_string(stages) + "]");
  }
  const StageGroup& g = plan.groups[plan.group_of_stage(stage_index)];
  const ProfileEntry e = lookup_profile(profile, g.chip, plan.dp, g.tp, g.recompute);
  const int w = detail::in_flight(plan.microbatches, stages, stage_index);
  return detail::stage_memory(g.layers_per_stage(), w, e.mem_model, e.mem_act);
}

struct FeasibilityVerdict {
  bool feasible = false;
  std::string violation;      // first violated constraint, empty when feasible
  int stage = 0;              // offending 1-based stage, 0 when not stage-specific
  std::string chip;           // offending chip type, when known
  std::vector<double> slack;  // safe_memory - peak per stage (filled when all stages priced)

  explicit operator bool() const { return feasible; }
};

/// Verdict on every plan invariant plus per-stage memory. Never throws for an
/// infeasible plan.
inline FeasibilityVerdict check_plan_feasibility(const ParallelPlan& plan,
                                                 const ClusterSpec& cluster,
                                                 const ProfileTable& profile,
                                                 const WorkloadSpec& workload) {
  FeasibilityVerdict v;
  auto fail = [&](std::string why, int stage = 0, std::string chip = {}) {
    v.feasible = false;
    v.violation = std::move(why);
    v.stage = stage;
    v.chip = std::move(chip);
    return v;
  };

  if (plan.groups.empty()) return fail("plan has no stages");
  if (plan.dp < 1 || plan.microbatches < 1) return fail("dp and microbatches must be positive");
  if (static_cast<long long>(plan.dp) * plan.microbatches != workload.global_batch) {
    return fail("microbatches * dp != global batch");
  }

  // Cluster order and contiguity.
  std::size_t last_type = 0;
  std::vector<int> used(cluster.chip_types.size(), 0);
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const StageGroup& g = plan.groups[i];
    const int stage = plan.first_stage(i);
    std::size_t t = cluster.chip_types.size();
    for (std::size_t k = 0; k < cluster.chip_types.size(); ++k) {
      if (cluster.chip_types[k].name == g.chip) t = k;
    }
    if (t == cluster.chip_types.size()) return fail("unknown chip type", stage, g.chip);
    if (t < last_type) return fail("stage order not memory-descending", stage, g.chip);
    last_type = t;
    const ChipTypeSpec& spec = cluster.chip_types[t];
    if (g.pp < 1) return fail("group has no stages", stage, g.chip);
    if (!is_power_of_two(g.tp)) return fail("tp not a power of two", stage, g.chip);
    if (g.tp > spec.tp_max) return fail("tp exceeds tp_max", stage, g.chip);
    if (g.layers < g.pp) return fail("fewer layers than stages", stage, g.chip);
    if (g.layers % g.pp != 0) return fail("layers not divisible by pp", stage, g.chip);
    used[t] += g.chips(plan.dp);
  }
  for (std::size_t k = 0; k < cluster.chip_types.size(); ++k) {
    if (used[k] != 0 && used[k] != cluster.chip_types[k].count) {
      return fail("pp * tp * dp does not match chip count", 0, cluster.chip_types[k].name);
    }
  }
  if (plan.total_layers() != workload.total_layers) return fail("layer total != L");

  const int stages = plan.num_stages();
  v.slack.assign(static_cast<std::size_t>(stages), 0.0);
  int first_bad = 0;
  std::string bad_chip;
  for (int s = 1; s <= stages; ++s) {
    const StageGroup& g = plan.groups[plan.group_of_stage(s)];
    const ChipProfile* p = profile.chip(g.chip);
    auto e = p != nullptr ? p->find(plan.dp, g.tp, g.recompute) : std::nullopt;
    if (!e) {
      v.slack.clear();
      return fail("profile entry absent " + profile_key(g.chip, plan.dp, g.tp, g.recompute), s,
                  g.chip);
    }
    const double peak = detail::stage_memory(
        g.layers_per_stage(), detail::in_flight(plan.microbatches, stages, s), e->mem_model,
        e->mem_act);
    const double safe = cluster.find(g.chip)->safe_memory;
    v.slack[static_cast<std::size_t>(s - 1)] = safe - peak;
    if (peak > safe && first_bad == 0) {
      first_bad = s;
      bad_chip = g.chip;
    }
  }
  if (first_bad != 0) {
    auto slack = std::move(v.slack);
    fail("stage memory exceeds safe capacity of chip " + bad_chip, first_bad, bad_chip);
    v.slack = std::move(slack);
    return v;
  }
  v.feasible = true;
  return v;
}

}  // namespace heteropp

#endif  // HETEROPP_COST_MODEL_HPP_
