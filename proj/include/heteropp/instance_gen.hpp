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

// Synthetic problem instances: seeded random small clusters for oracle
// comparisons, and a four-chip catalogue (A..D) loosely shaped after public
// accelerator classes. All numbers here are SYNTHETIC.

#ifndef HETEROPP_INSTANCE_GEN_HPP_
#define HETEROPP_INSTANCE_GEN_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/profile.hpp"

namespace heteropp {

struct Instance {
  ClusterSpec cluster;
  ProfileTable profile;
  WorkloadSpec workload;
};

constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

/// 100B-class dense model, 96 layers, 4096-token sequences.
struct ModelShape {
  int layers = 96;
  int seq_len = 4096;
  double layer_state_bytes = 16.0 * 1.04e9;  // fp16 weights + grads + fp32 Adam
  double activation_bytes = 34.0 * 4096 * 10240;
  double base_layer_seconds = 0.057;  // forward of one layer on the reference chip
};

struct CatalogueChip {
  ChipTypeSpec spec;
  SyntheticChipParams params;
};

/// Chip A..D: 96/64/32/32 GiB, 16/8/16/8 chips per node, tp_max 8, and
/// relative FP16 throughput 0.75/0.8/0.3/1.75. `count` chips of the type.
inline CatalogueChip catalogue_chip(char name, int count, const ModelShape& shape = {}) {
  struct Row {
    double mem_gib, flops;
    int per_node;
  };
  Row r{};
  switch (name) {
    case 'A': r = {96, 0.75, 16}; break;
    case 'B': r = {64, 0.80, 8}; break;
    case 'C': r = {32, 0.30, 16}; break;
    case 'D': r = {32, 1.75, 8}; break;
    default: throw InputError(std::string("unknown catalogue chip '") + name + "'");
  }
  CatalogueChip c;
  c.spec.name = std::string("chip-") + name;
  c.spec.count = count;
  c.spec.safe_memory = 0.9 * r.mem_gib * kGiB;
  c.spec.tp_max = 8;
  c.spec.chips_per_node = r.per_node;
  c.spec.nic_count_per_node = r.per_node / 2;
  c.spec.affinity_bandwidth = 9.56e9;
  c.spec.non_affinity_bandwidth = 5.51e9;
  c.spec.intra_node_bandwidth = 150e9;
  c.params.flops_ratio = r.flops;
  c.params.layer_state_bytes = shape.layer_state_bytes;
  c.params.activation_bytes = shape.activation_bytes;
  c.params.base_layer_seconds = shape.base_layer_seconds;
  c.params.tp_max = 8;
  c.params.tp_efficiency = {{1, 1.0}, {2, 0.95}, {4, 0.9}, {8, 0.8}};
  return c;
}

/// Cluster of catalogue chips, `counts[i]` chips of `names[i]`, training on
/// `tokens` tokens per iteration.
inline Instance catalogue_instance(const std::string& names, const std::vector<int>& counts,
                                   long long tokens, const ModelShape& shape = {}) {
  if (names.size() != counts.size()) throw InputError("catalogue_instance: size mismatch");
  Instance inst;
  inst.workload.total_layers = shape.layers;
  inst.workload.global_batch = batch_from_tokens(tokens, shape.seq_len);
  const std::vector<int> dps = divisors(inst.workload.global_batch);
  for (std::size_t i = 0; i < names.size(); ++i) {
    CatalogueChip c = catalogue_chip(names[i], counts[i], shape);
    c.params.dp_values = dps;
    inst.cluster.chip_types.push_back(c.spec);
    inst.profile.set_chip(c.spec.name, synthesize_profile(c.params));
  }
  inst.cluster = validate_cluster_spec(std::move(inst.cluster));
  return inst;
}

/// 256 chips each of A, B, C and D with a 2M-token batch.
inline Instance exp_b_instance() {
  return catalogue_instance("ABCD", {256, 256, 256, 256}, 2LL * 1024 * 1024);
}

/// Seeded random instance within the oracle limits: at most 3 chip types,
/// at most 256 chips, L <= `max_layers`, B <= 64. Memory is sized so that a
/// good share of configurations fail the capacity check.
inline Instance random_instance(std::uint64_t seed, int max_layers = 64) {
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto real = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  Instance inst;
  const int types = uni(1, 6) == 1 ? 1 : uni(2, 3);
  inst.workload.total_layers = uni(2, std::max(2, max_layers));
  static constexpr int kComposite[] = {8, 12, 16, 24, 32, 48, 64};
  inst.workload.global_batch = uni(0, 1) == 0 ? uni(1, 64) : kComposite[uni(0, 6)];
  const std::vector<int> dps = divisors(inst.workload.global_batch);

  int budget = 256;
  int pipeline_guess = 0;
  std::vector<SyntheticChipParams> params;
  for (int i = 0; i < types; ++i) {
    ChipTypeSpec c;
    c.name = std::string(1, static_cast<char>('p' + i));
    c.chips_per_node = uni(0, 1) == 0 ? 8 : 16;
    c.tp_max = 1 << uni(0, 3);
    static constexpr int kMultiples[] = {1, 2, 3, 4, 6, 8, 12, 16, 24, 32};
    const int max_mult = std::max(1, budget / (types - i) / c.tp_max);
    int mult = 1;
    for (int tries = 0; tries < 8; ++tries) {
      const int m = kMultiples[uni(0, 9)];
      if (m <= max_mult) {
        mult = m;
        break;
      }
    }
    c.count = c.tp_max * mult;
    budget -= c.count;
    c.nic_count_per_node = c.chips_per_node / (1 << uni(0, 2));
    c.affinity_bandwidth = real(5e9, 12e9);
    c.non_affinity_bandwidth = c.affinity_bandwidth * real(0.4, 0.9);
    c.intra_node_bandwidth = real(50e9, 300e9);
    c.safe_memory = real(16.0, 96.0) * kGiB;
    pipeline_guess += std::max(1, c.count / std::max(1, c.tp_max / 2));
    inst.cluster.chip_types.push_back(c);

    SyntheticChipParams p;
    p.flops_ratio = real(0.2, 2.0);
    p.base_layer_seconds = real(0.01, 0.1);
    p.tp_max = c.tp_max;
    p.dp_values = dps;
    for (int tp = 2; tp <= c.tp_max; tp *= 2) p.tp_efficiency[tp] = real(0.6, 1.0);
    p.recompute_activation_ratio = real(0.05, 0.5);
    p.update_fraction = real(0.02, 0.3);
    p.sync_fraction = real(0.0, 0.3);
    p.optimizer_share = real(0.0, 0.8);
    params.push_back(p);
  }
  // Per-layer sizes relative to the smallest chip so that one pipeline's worth
  // of layers sits near capacity.
  double min_mem = inst.cluster.chip_types.front().safe_memory;
  for (const auto& c : inst.cluster.chip_types) min_mem = std::min(min_mem, c.safe_memory);
  const double per_layer = min_mem * pipeline_guess / inst.workload.total_layers;
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].layer_state_bytes = per_layer * real(0.1, 1.0);
    params[i].activation_bytes = params[i].layer_state_bytes * real(0.01, 0.2);
    inst.profile.set_chip(inst.cluster.chip_types[i].name, synthesize_profile(params[i]));
  }
  inst.cluster = validate_cluster_spec(std::move(inst.cluster));
  return inst;
}

}  // namespace heteropp

#endif  // HETEROPP_INSTANCE_GEN_HPP_
