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

#ifndef HETEROPP_PROFILE_HPP_
#define HETEROPP_PROFILE_HPP_

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/errors.hpp"

namespace heteropp {

/// Per-layer, per-microbatch times at one TP degree, in seconds.
struct LayerTimes {
  double fwd = 0.0;
  double bwd = 0.0;
  double recomp = 0.0;

  bool operator==(const LayerTimes&) const = default;
};

/// Everything the cost model needs for one (chip, dp, tp, recompute) key.
struct ProfileEntry {
  double t_fwd = 0.0;
  double t_bwd = 0.0;
  double t_recomp = 0.0;
  double t_update = 0.0;   // seconds per layer
  double mem_act = 0.0;    // bytes per layer per in-flight microbatch
  double mem_model = 0.0;  // bytes per layer: parameters, gradients, optimizer state

  bool operator==(const ProfileEntry&) const = default;
};

/// Layer-wise measurements of one chip type. Keys are exact; nothing is
/// interpolated.
struct ChipProfile {
  int tp_max = 1;
  std::map<int, LayerTimes> times;                      // tp
  std::map<std::pair<int, int>, double> update;         // (dp, tp)
  std::map<std::pair<int, bool>, double> act_memory;    // (tp, recompute)
  std::map<std::pair<int, int>, double> model_memory;   // (dp, tp)

  bool operator==(const ChipProfile&) const = default;

  std::optional<ProfileEntry> find(int dp, int tp, bool recompute) const {
    auto t = times.find(tp);
    auto u = update.find({dp, tp});
    auto a = act_memory.find({tp, recompute});
    auto m = model_memory.find({dp, tp});
    if (t == times.end() || u == update.end() || a == act_memory.end() ||
        m == model_memory.end()) {
      return std::nullopt;
    }
    return ProfileEntry{t->second.fwd, t->second.bwd, t->second.recomp,
                        u->second,     a->second,    m->second};
  }
};

class ProfileTable {
 public:
  ProfileTable() = default;

  void set_chip(const std::string& name, ChipProfile profile) {
    chips_[name] = std::move(profile);
  }

  const ChipProfile* chip(const std::string& name) const {
    auto it = chips_.find(name);
    return it == chips_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, ChipProfile>& chips() const { return chips_; }

  bool operator==(const ProfileTable&) const = default;

 private:
  std::map<std::string, ChipProfile> chips_;
};

inline std::string profile_key(const std::string& chip, int dp, int tp, bool r) {
  return "(chip=" + chip + ", dp=" + std::to_string(dp) + ", tp=" + std::to_string(tp) +
         ", recompute=" + (r ? "1" : "0") + ")";
}

/// Exact-key lookup. Throws InputError for an unknown chip or an invalid TP
/// degree and ProfileEntryAbsent when the key is not in the table.
inline ProfileEntry lookup_profile(const ProfileTable& table, const std::string& chip, int dp,
                                   int tp, bool recompute) {
  const ChipProfile* p = table.chip(chip);
  if (p == nullptr) throw InputError("profile has no chip '" + chip + "'");
  if (!is_power_of_two(tp) || tp > p->tp_max) {
    throw InputError("tp " + std::to_string(tp) + " is not a power of two <= tp_max " +
                     std::to_string(p->tp_max) + " for chip '" + chip + "'");
  }
  auto e = p->find(dp, tp, recompute);
  if (!e) {
    throw ProfileEntryAbsent("profile entry absent " + profile_key(chip, dp, tp, recompute));
  }
  return *e;
}

/// Checks the table against the cluster: every chip present, every
/// power-of-two tp <= tp_max profiled, values positive and finite, and
/// recomputation never increasing stored activations.
inline void validate_profile(const ProfileTable& table, const ClusterSpec& cluster) {
  for (const auto& c : cluster.chip_types) {
    const ChipProfile* p = table.chip(c.name);
    if (p == nullptr) throw InputError("profile has no chip '" + c.name + "'");
    auto where = [&](const std::string& s) { return "profile '" + c.name + "': " + s; };
    if (p->tp_max != c.tp_max) throw InputError(where("tp_max differs from cluster spec"));
    for (int tp = 1; tp <= c.tp_max; tp *= 2) {
      auto t = p->times.find(tp);
      if (t == p->times.end()) throw InputError(where("no layer times for tp=" + std::to_string(tp)));
      for (double v : {t->second.fwd, t->second.bwd, t->second.recomp}) {
        if (!detail::positive_finite(v)) throw InputError(where("non-positive layer time"));
      }
      auto a0 = p->act_memory.find({tp, false});
      auto a1 = p->act_memory.find({tp, true});
      if (a0 == p->act_memory.end() || a1 == p->act_memory.end()) {
        throw InputError(where("no activation memory for tp=" + std::to_string(tp)));
      }
      if (a1->second > a0->second) {
        throw InputError(where("recompute activation memory exceeds non-recompute at tp=" +
                               std::to_string(tp)));
      }
    }
    for (const auto& [key, v] : p->act_memory) {
      if (!detail::positive_finite(v)) throw InputError(where("non-positive activation memory"));
    }
    for (const auto& [key, v] : p->update) {
      if (!detail::positive_finite(v)) throw InputError(where("non-positive update time"));
    }
    for (const auto& [key, v] : p->model_memory) {
      if (!detail::positive_finite(v)) throw InputError(where("non-positive model memory"));
    }
  }
}

/// Parameters of the synthetic profile generator. Times scale inversely with
/// relative FLOPS, TP degree, and TP efficiency.
struct SyntheticChipParams {
  double flops_ratio = 1.0;             // relative to a reference chip
  double layer_state_bytes = 0.0;       // params + grads + optimizer per layer at tp=1, dp=1
  std::map<int, double> tp_efficiency;  // tp -> (0, 1]; missing entries default to 1
  double base_layer_seconds = 0.0;      // reference forward time per layer
  int tp_max = 1;
  std::vector<int> dp_values{1};
  double activation_bytes = 0.0;           // stored activations per layer per microbatch, tp=1
  double recompute_activation_ratio = 0.1;  // fraction kept when recomputing
  double update_fraction = 0.05;  // optimizer step time as a fraction of t_fwd at tp=1
  double sync_fraction = 0.05;    // non-overlapped gradient sync, same units
  double optimizer_share = 0.75;  // part of layer_state_bytes sharded over dp
};

/// Deterministic synthetic profile:
///   t_fwd(tp)  = base / (flops * tp * eff(tp)), t_bwd = 2 t_fwd, t_recomp = t_fwd
///   t_update   = t_fwd(1) * (update_fraction / tp + sync_fraction * (dp-1)/dp / tp)
///   mem_model  = state / tp * ((1 - share) + share / dp)
///   mem_act    = act / tp, scaled by the recompute ratio when r = 1
inline ChipProfile synthesize_profile(const SyntheticChipParams& p) {
  if (!detail::positive_finite(p.flops_ratio) || !detail::positive_finite(p.base_layer_seconds) ||
      !detail::positive_finite(p.layer_state_bytes) ||
      !detail::positive_finite(p.activation_bytes)) {
    throw InputError("synthesize_profile: flops_ratio, base_layer_seconds, layer_state_bytes and "
                     "activation_bytes must be positive");
  }
  if (!is_power_of_two(p.tp_max)) throw InputError("synthesize_profile: tp_max not a power of two");
  if (!(p.recompute_activation_ratio > 0.0 && p.recompute_activation_ratio <= 1.0)) {
    throw InputError("synthesize_profile: recompute_activation_ratio must be in (0, 1]");
  }
  if (!detail::positive_finite(p.update_fraction) || p.sync_fraction < 0.0 ||
      p.optimizer_share < 0.0 || p.optimizer_share >= 1.0) {
    throw InputError("synthesize_profile: invalid update/sync/optimizer parameters");
  }
  if (p.dp_values.empty()) throw InputError("synthesize_profile: no dp values");

  ChipProfile out;
  out.tp_max = p.tp_max;
  const double t1 = p.base_layer_seconds / p.flops_ratio;
  for (int tp = 1; tp <= p.tp_max; tp *= 2) {
    double eff = 1.0;
    if (auto it = p.tp_efficiency.find(tp); it != p.tp_efficiency.end()) eff = it->second;
    if (!(eff > 0.0 && eff <= 1.0)) {
      throw InputError("synthesize_profile: tp_efficiency must be in (0, 1]");
    }
    const double fwd = p.base_layer_seconds / (p.flops_ratio * tp * eff);
    out.times[tp] = LayerTimes{fwd, 2.0 * fwd, fwd};
    const double act = p.activation_bytes / tp;
    out.act_memory[{tp, false}] = act;
    out.act_memory[{tp, true}] = act * p.recompute_activation_ratio;
    for (int dp : p.dp_values) {
      if (dp < 1) throw InputError("synthesize_profile: dp values must be positive");
      const double sync = p.sync_fraction * static_cast<double>(dp - 1) / dp;
      out.update[{dp, tp}] = t1 * (p.update_fraction + sync) / tp;
      out.model_memory[{dp, tp}] =
          p.layer_state_bytes / tp * ((1.0 - p.optimizer_share) + p.optimizer_share / dp);
    }
  }
  return out;
}

}  // namespace heteropp

#endif  // HETEROPP_PROFILE_HPP_
