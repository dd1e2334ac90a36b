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

#ifndef HETEROPP_CLUSTER_HPP_
#define HETEROPP_CLUSTER_HPP_

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "heteropp/errors.hpp"

namespace heteropp {

constexpr bool is_power_of_two(long long v) { return v > 0 && (v & (v - 1)) == 0; }

/// Ascending list of the positive divisors of `n`.
inline std::vector<int> divisors(int n) {
  std::vector<int> out;
  for (int d = 1; d <= n; ++d) {
    if (n % d == 0) out.push_back(d);
  }
  return out;
}

/// One accelerator type of the cluster. Memory in bytes, bandwidth in bytes/s.
struct ChipTypeSpec {
  std::string name;
  int count = 0;             // chips of this type
  double safe_memory = 0.0;  // profiled safe capacity per chip
  int tp_max = 1;            // power of two, at most chips_per_node
  int chips_per_node = 1;
  int nic_count_per_node = 1;
  double affinity_bandwidth = 0.0;      // per NIC
  double non_affinity_bandwidth = 0.0;  // per NIC
  double intra_node_bandwidth = 0.0;

  bool operator==(const ChipTypeSpec&) const = default;
};

/// Chip types ordered by safe memory, largest first. Stages are laid out in
/// this order, so larger-memory chips host the earlier pipeline stages.
struct ClusterSpec {
  std::vector<ChipTypeSpec> chip_types;

  const ChipTypeSpec* find(const std::string& name) const {
    for (const auto& c : chip_types) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }

  int total_chips() const {
    int n = 0;
    for (const auto& c : chip_types) n += c.count;
    return n;
  }

  bool operator==(const ClusterSpec&) const = default;
};

struct WorkloadSpec {
  int total_layers = 0;             // uniform Transformer layers
  int global_batch = 0;             // in microbatches of one sequence
  double bubble_coefficient = 1.0;  // 1 for 1F1B, 0 for zero-bubble schedules
  // Optional additive constant on iteration time. Defaults to zero; nothing
  // in the cost model derives it.
  double pipeline_overhead = 0.0;

  bool operator==(const WorkloadSpec&) const = default;
};

namespace detail {

inline bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

inline void check_chip(const ChipTypeSpec& c) {
  auto fail = [&](const std::string& what) {
    throw InputError("chip type '" + c.name + "': " + what);
  };
  if (c.name.empty()) throw InputError("chip type with empty name");
  if (c.count < 1) fail("count must be positive");
  if (!positive_finite(c.safe_memory)) fail("safe_memory must be positive");
  if (c.chips_per_node < 1) fail("chips_per_node must be positive");
  if (c.nic_count_per_node < 1) fail("nic_count_per_node must be positive");
  if (c.tp_max < 1) fail("tp_max must be positive");
  if (!is_power_of_two(c.tp_max)) fail("tp_max not a power of two");
  if (c.tp_max > c.chips_per_node) fail("tp_max exceeds chips_per_node");
  if (!positive_finite(c.non_affinity_bandwidth)) fail("non_affinity_bandwidth must be positive");
  if (!positive_finite(c.affinity_bandwidth)) fail("affinity_bandwidth must be positive");
  if (c.affinity_bandwidth < c.non_affinity_bandwidth) {
    fail("affinity_bandwidth below non_affinity_bandwidth");
  }
  if (!positive_finite(c.intra_node_bandwidth)) fail("intra_node_bandwidth must be positive");
}

}  // namespace detail

/// Checks every chip type and returns the spec sorted memory-descending
/// (ties by name ascending). Idempotent.
inline ClusterSpec validate_cluster_spec(ClusterSpec spec) {
  if (spec.chip_types.empty()) throw InputError("cluster has no chip types");
  std::set<std::string> names;
  for (const auto& c : spec.chip_types) {
    detail::check_chip(c);
    if (!names.insert(c.name).second) {
      throw InputError("chip type '" + c.name + "': duplicate chip-type name");
    }
  }
  std::sort(spec.chip_types.begin(), spec.chip_types.end(),
            [](const ChipTypeSpec& a, const ChipTypeSpec& b) {
              if (a.safe_memory != b.safe_memory) return a.safe_memory > b.safe_memory;
              return a.name < b.name;
            });
  return spec;
}

inline void validate_workload(const WorkloadSpec& w) {
  if (w.total_layers < 1) throw InputError("workload: total_layers must be positive");
  if (w.global_batch < 1) throw InputError("workload: global_batch must be positive");
  if (!std::isfinite(w.bubble_coefficient) || w.bubble_coefficient < 0.0) {
    throw InputError("workload: bubble_coefficient must be non-negative");
  }
  if (!std::isfinite(w.pipeline_overhead) || w.pipeline_overhead < 0.0) {
    throw InputError("workload: pipeline_overhead must be non-negative");
  }
}

/// Microbatches of one sequence each from a token budget.
inline int batch_from_tokens(long long tokens, int sequence_length) {
  if (sequence_length < 1 || tokens < sequence_length || tokens % sequence_length != 0) {
    throw InputError("global batch in tokens must be a positive multiple of the sequence length");
  }
  return static_cast<int>(tokens / sequence_length);
}

}  // namespace heteropp

#endif  // HETEROPP_CLUSTER_HPP_
