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

#ifndef HETEROPP_PLAN_HPP_
#define HETEROPP_PLAN_HPP_

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "heteropp/errors.hpp"

namespace heteropp {

/// A run of consecutive pipeline stages that share one chip type and one
/// configuration. A chip type normally maps to one group; the two-stage
/// search splits a type into several groups of the same chip.
struct StageGroup {
  std::string chip;
  int pp = 0;  // stages in this group
  int tp = 1;
  bool recompute = false;
  int layers = 0;  // total over the group's stages, a multiple of pp

  int layers_per_stage() const { return pp > 0 ? layers / pp : 0; }
  int chips(int dp) const { return pp * tp * dp; }

  bool operator==(const StageGroup&) const = default;
};

/// A complete heterogeneous pipeline configuration. Groups are listed in
/// stage order; stage indices are 1-based from the pipeline head.
struct ParallelPlan {
  int dp = 1;
  int microbatches = 1;
  std::vector<StageGroup> groups;

  int num_stages() const {
    int n = 0;
    for (const auto& g : groups) n += g.pp;
    return n;
  }

  int total_layers() const {
    int n = 0;
    for (const auto& g : groups) n += g.layers;
    return n;
  }

  /// 1-based index of the first stage of group `g`.
  int first_stage(std::size_t g) const {
    int s = 1;
    for (std::size_t i = 0; i < g; ++i) s += groups[i].pp;
    return s;
  }

  std::size_t group_of_stage(int stage) const {
    int s = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      s += groups[i].pp;
      if (stage <= s) return i;
    }
    throw InputError("stage index " + std::to_string(stage) + " out of range");
  }

  bool operator==(const ParallelPlan&) const = default;
};

namespace detail {

/// Tie-break between plans of equal iteration time: smaller dp, then
/// lexicographically smaller tp vector, then fewer recomputed groups, then
/// lexicographically smaller recompute vector, then more layers on earlier
/// groups. Returns <0 when `a` is preferred, >0 when `b` is, 0 when equal.
inline int compare_plan_keys(const ParallelPlan& a, const ParallelPlan& b) {
  if (a.dp != b.dp) return a.dp < b.dp ? -1 : 1;
  const std::size_t n = std::min(a.groups.size(), b.groups.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a.groups[i].tp != b.groups[i].tp) return a.groups[i].tp < b.groups[i].tp ? -1 : 1;
  }
  if (a.groups.size() != b.groups.size()) return a.groups.size() < b.groups.size() ? -1 : 1;
  int ra = 0, rb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ra += a.groups[i].recompute ? 1 : 0;
    rb += b.groups[i].recompute ? 1 : 0;
  }
  if (ra != rb) return ra < rb ? -1 : 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (a.groups[i].recompute != b.groups[i].recompute) return a.groups[i].recompute ? 1 : -1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (a.groups[i].layers != b.groups[i].layers) {
      return a.groups[i].layers > b.groups[i].layers ? -1 : 1;
    }
  }
  return 0;
}

}  // namespace detail

/// True when (cost_a, a) should replace (cost_b, b) as the incumbent.
inline bool plan_preferred(double cost_a, const ParallelPlan& a, double cost_b,
                           const ParallelPlan& b) {
  if (cost_a != cost_b) return cost_a < cost_b;
  return detail::compare_plan_keys(a, b) < 0;
}

}  // namespace heteropp

#endif  // HETEROPP_PLAN_HPP_
