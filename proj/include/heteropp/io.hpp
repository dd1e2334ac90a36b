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

// JSON files, schema version 1. Every document carries "schema": 1; units are
// bytes, seconds and bytes/second. Readers report malformed input as
// InputError("<file>: <field path>: <problem>").
//
//   cluster   {"chip_types": [{"name", "count", "safe_memory_bytes", "tp_max",
//              "chips_per_node", "nic_count_per_node", "affinity_bandwidth_Bps",
//              "non_affinity_bandwidth_Bps", "intra_node_bandwidth_Bps"}]}
//   workload  {"total_layers", "global_batch" | ("global_batch_tokens",
//              "seq_len"), "bubble_coefficient"?, "pipeline_overhead_s"?}
//   profile   {"chips": {"<name>": {"tp_max", "times": [{"tp", "fwd_s",
//              "bwd_s", "recomp_s"}], "update": [{"dp", "tp", "seconds"}],
//              "act_memory": [{"tp", "recompute", "bytes"}],
//              "model_memory": [{"dp", "tp", "bytes"}]}}}
//   plan      {"dp", "microbatches", "stages": [{"chip", "tp", "recompute",
//              "layers_per_stage", "group"?}], "cost"?}
//   cost      {"total", "overhead", "stages": [{"stage", "chip",
//              "compute_time", "update_time", "bubble_term", "stage_total"}]}
//   links     {"links": [{"mode", "base_latency_s", "bandwidth_Bps",
//              "staging_penalty_s_per_B"}]}
//   comm      {"link": "<mode>" | {link}, "links_file"?, "method",
//              "overlap_fraction", "activation_bytes"}
//   synthetic {"chips": [{"name", "flops_ratio", "layer_state_bytes",
//              "activation_bytes", "base_layer_seconds", "tp_max",
//              "dp_values", "tp_efficiency"?: [{"tp", "efficiency"}], ...}]}

#ifndef HETEROPP_IO_HPP_
#define HETEROPP_IO_HPP_

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heteropp/cluster.hpp"
#include "heteropp/comm_model.hpp"
#include "heteropp/cost_model.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/plan.hpp"
#include "heteropp/profile.hpp"
#include "heteropp/schedule_sim.hpp"

namespace heteropp {

using json = nlohmann::json;

constexpr int kSchemaVersion = 1;

namespace detail {

/// A JSON node together with its location, for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw InputError(path_ + ": " + what); }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  Node operator[](const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    auto it = j_.find(key);
    if (it == j_.end()) throw InputError(path_ + "." + key + ": missing field");
    return {*it, path_ + "." + key};
  }

  Node operator[](std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }

  int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    const auto v = j_.get<long long>();
    if (v < -(1LL << 31) || v >= (1LL << 31)) fail("integer out of range");
    return static_cast<int>(v);
  }

  bool boolean() const {
    if (j_.is_boolean()) return j_.get<bool>();
    if (j_.is_number_integer() && (j_.get<int>() == 0 || j_.get<int>() == 1)) return j_.get<int>() == 1;
    fail("expected a boolean");
  }

  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? (*this)[key].number() : fallback;
  }

 private:
  const json& j_;
  std::string path_;
};

inline void check_schema(const Node& root) {
  if (!root.raw().is_object()) root.fail("expected a JSON object");
  if (!root.has("schema")) throw InputError(root.path() + ".schema: missing field");
  const int v = root["schema"].integer();
  if (v != kSchemaVersion) {
    throw InputError(root.path() + ".schema: unsupported version " + std::to_string(v));
  }
}

inline json with_schema(json body) {
  json out = {{"schema", kSchemaVersion}};
  for (auto& [k, v] : body.items()) out[k] = std::move(v);
  return out;
}

}  // namespace detail

inline json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

inline void save_json(const json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
  if (!f) throw Error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------- cluster

inline json to_json(const ClusterSpec& c) {
  json types = json::array();
  for (const auto& t : c.chip_types) {
    types.push_back({{"name", t.name},
                     {"count", t.count},
                     {"safe_memory_bytes", t.safe_memory},
                     {"tp_max", t.tp_max},
                     {"chips_per_node", t.chips_per_node},
                     {"nic_count_per_node", t.nic_count_per_node},
                     {"affinity_bandwidth_Bps", t.affinity_bandwidth},
                     {"non_affinity_bandwidth_Bps", t.non_affinity_bandwidth},
                     {"intra_node_bandwidth_Bps", t.intra_node_bandwidth}});
  }
  return detail::with_schema({{"chip_types", types}});
}

/// Parses and validates; the result is sorted by safe memory.
inline ClusterSpec cluster_from_json(const json& j, const std::string& where = "cluster") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  const detail::Node types = root["chip_types"];
  ClusterSpec c;
  for (std::size_t i = 0; i < types.size(); ++i) {
    const detail::Node t = types[i];
    ChipTypeSpec s;
    s.name = t["name"].string();
    s.count = t["count"].integer();
    s.safe_memory = t["safe_memory_bytes"].number();
    s.tp_max = t["tp_max"].integer();
    s.chips_per_node = t["chips_per_node"].integer();
    s.nic_count_per_node = t["nic_count_per_node"].integer();
    s.affinity_bandwidth = t["affinity_bandwidth_Bps"].number();
    s.non_affinity_bandwidth = t["non_affinity_bandwidth_Bps"].number();
    s.intra_node_bandwidth = t["intra_node_bandwidth_Bps"].number();
    c.chip_types.push_back(std::move(s));
  }
  try {
    return validate_cluster_spec(std::move(c));
  } catch (const InputError& e) {
    throw InputError(where + ": " + e.what());
  }
}

// ---------------------------------------------------------------- workload

inline json to_json(const WorkloadSpec& w) {
  return detail::with_schema({{"total_layers", w.total_layers},
                              {"global_batch", w.global_batch},
                              {"bubble_coefficient", w.bubble_coefficient},
                              {"pipeline_overhead_s", w.pipeline_overhead}});
}

inline WorkloadSpec workload_from_json(const json& j, const std::string& where = "workload") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  WorkloadSpec w;
  w.total_layers = root["total_layers"].integer();
  if (root.has("global_batch")) {
    w.global_batch = root["global_batch"].integer();
  } else {
    const auto tokens = static_cast<long long>(root["global_batch_tokens"].number());
    const int seq = root["seq_len"].integer();
    try {
      w.global_batch = batch_from_tokens(tokens, seq);
    } catch (const InputError& e) {
      throw InputError(where + ".global_batch_tokens: " + e.what());
    }
  }
  w.bubble_coefficient = root.number_or("bubble_coefficient", 1.0);
  w.pipeline_overhead = root.number_or("pipeline_overhead_s", 0.0);
  try {
    validate_workload(w);
  } catch (const InputError& e) {
    throw InputError(where + ": " + e.what());
  }
  return w;
}

// ---------------------------------------------------------------- profile

inline json to_json(const ProfileTable& p) {
  json chips = json::object();
  for (const auto& [name, c] : p.chips()) {
    json times = json::array(), update = json::array(), act = json::array(), model = json::array();
    for (const auto& [tp, t] : c.times) {
      times.push_back({{"tp", tp}, {"fwd_s", t.fwd}, {"bwd_s", t.bwd}, {"recomp_s", t.recomp}});
    }
    for (const auto& [k, v] : c.update) {
      update.push_back({{"dp", k.first}, {"tp", k.second}, {"seconds", v}});
    }
    for (const auto& [k, v] : c.act_memory) {
      act.push_back({{"tp", k.first}, {"recompute", k.second}, {"bytes", v}});
    }
    for (const auto& [k, v] : c.model_memory) {
      model.push_back({{"dp", k.first}, {"tp", k.second}, {"bytes", v}});
    }
    chips[name] = {{"tp_max", c.tp_max},
                   {"times", times},
                   {"update", update},
                   {"act_memory", act},
                   {"model_memory", model}};
  }
  return detail::with_schema({{"chips", chips}});
}

inline ProfileTable profile_from_json(const json& j, const std::string& where = "profile") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  const detail::Node chips = root["chips"];
  if (!chips.raw().is_object()) chips.fail("expected an object keyed by chip name");
  ProfileTable table;
  for (const auto& [name, body] : chips.raw().items()) {
    const detail::Node c(body, chips.path() + "." + name);
    ChipProfile p;
    p.tp_max = c["tp_max"].integer();
    const detail::Node times = c["times"];
    for (std::size_t i = 0; i < times.size(); ++i) {
      const detail::Node t = times[i];
      p.times[t["tp"].integer()] =
          LayerTimes{t["fwd_s"].number(), t["bwd_s"].number(), t["recomp_s"].number()};
    }
    const detail::Node update = c["update"];
    for (std::size_t i = 0; i < update.size(); ++i) {
      const detail::Node u = update[i];
      p.update[{u["dp"].integer(), u["tp"].integer()}] = u["seconds"].number();
    }
    const detail::Node act = c["act_memory"];
    for (std::size_t i = 0; i < act.size(); ++i) {
      const detail::Node a = act[i];
      p.act_memory[{a["tp"].integer(), a["recompute"].boolean()}] = a["bytes"].number();
    }
    const detail::Node model = c["model_memory"];
    for (std::size_t i = 0; i < model.size(); ++i) {
      const detail::Node m = model[i];
      p.model_memory[{m["dp"].integer(), m["tp"].integer()}] = m["bytes"].number();
    }
    table.set_chip(name, std::move(p));
  }
  return table;
}

// ---------------------------------------------------------------- plan/cost

inline json to_json(const CostBreakdown& c) {
  json stages = json::array();
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    const auto& s = c.stages[i];
    stages.push_back({{"stage", i + 1},
                      {"chip", s.chip},
                      {"compute_time", s.compute_time},
                      {"update_time", s.update_time},
                      {"bubble_term", s.bubble_term},
                      {"stage_total", s.stage_total}});
  }
  return detail::with_schema({{"total", c.total}, {"overhead", c.overhead}, {"stages", stages}});
}

inline CostBreakdown cost_from_json(const json& j, const std::string& where = "cost") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  CostBreakdown c;
  c.total = root["total"].number();
  c.overhead = root.number_or("overhead", 0.0);
  const detail::Node stages = root["stages"];
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const detail::Node s = stages[i];
    c.stages.push_back({s["chip"].string(), s["compute_time"].number(), s["update_time"].number(),
                        s["bubble_term"].number(), s["stage_total"].number()});
  }
  return c;
}

/// One record per pipeline stage, head first.
inline json to_json(const ParallelPlan& p, const CostBreakdown* cost = nullptr) {
  json stages = json::array();
  for (std::size_t g = 0; g < p.groups.size(); ++g) {
    const auto& grp = p.groups[g];
    for (int k = 0; k < grp.pp; ++k) {
      stages.push_back({{"chip", grp.chip},
                        {"tp", grp.tp},
                        {"recompute", grp.recompute},
                        {"layers_per_stage", grp.layers_per_stage()},
                        {"group", g}});
    }
  }
  json out = detail::with_schema(
      {{"dp", p.dp}, {"microbatches", p.microbatches}, {"stages", stages}});
  if (cost != nullptr) out["cost"] = to_json(*cost);
  return out;
}

/// Consecutive stages with the same "group" (or, without group indices, the
/// same chip, tp, recompute and layer count) form one StageGroup.
inline ParallelPlan plan_from_json(const json& j, const std::string& where = "plan") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  ParallelPlan p;
  p.dp = root["dp"].integer();
  p.microbatches = root["microbatches"].integer();
  const detail::Node stages = root["stages"];
  if (stages.size() == 0) stages.fail("plan has no stages");
  int last_group = -1;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const detail::Node s = stages[i];
    StageGroup g{s["chip"].string(), 1, s["tp"].integer(), s["recompute"].boolean(),
                 s["layers_per_stage"].integer()};
    const int group = s.has("group") ? s["group"].integer() : -1;
    if (g.layers < 1) s["layers_per_stage"].fail("must be positive");
    bool extend = false;
    if (!p.groups.empty()) {
      const StageGroup& back = p.groups.back();
      const bool same = back.chip == g.chip && back.tp == g.tp && back.recompute == g.recompute &&
                        back.layers_per_stage() == g.layers;
      if (group >= 0) {
        if (group == last_group && !same) s.fail("stage differs from the rest of its group");
        extend = group == last_group;
      } else {
        extend = same;
      }
    }
    if (extend) {
      ++p.groups.back().pp;
      p.groups.back().layers += g.layers;
    } else {
      p.groups.push_back(g);
    }
    last_group = group;
  }
  return p;
}

// ---------------------------------------------------------------- comm

inline json to_json(const LinkModel& l) {
  return {{"mode", to_string(l.mode)},
          {"base_latency_s", l.base_latency},
          {"bandwidth_Bps", l.bandwidth},
          {"staging_penalty_s_per_B", l.staging_penalty}};
}

inline LinkModel link_from_node(const detail::Node& n) {
  LinkModel l;
  try {
    l.mode = link_mode_from_string(n["mode"].string());
  } catch (const InputError& e) {
    throw InputError(n.path() + ".mode: " + e.what());
  }
  l.base_latency = n["base_latency_s"].number();
  l.bandwidth = n["bandwidth_Bps"].number();
  l.staging_penalty = n["staging_penalty_s_per_B"].number();
  try {
    validate_link(l);
  } catch (const InputError& e) {
    throw InputError(n.path() + ": " + e.what());
  }
  return l;
}

inline json links_to_json(const std::vector<LinkModel>& links) {
  json arr = json::array();
  for (const auto& l : links) arr.push_back(to_json(l));
  return detail::with_schema({{"synthetic", true}, {"links", arr}});
}

inline std::vector<LinkModel> links_from_json(const json& j, const std::string& where = "links") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  const detail::Node arr = root["links"];
  std::vector<LinkModel> out;
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(link_from_node(arr[i]));
  return out;
}

inline json to_json(const CommOptions& c) {
  return detail::with_schema({{"link", to_json(c.link)},
                              {"method", to_string(c.method)},
                              {"overlap_fraction", c.overlap_fraction},
                              {"activation_bytes", c.activation_bytes}});
}

/// "link" is either a full link object or a mode name resolved against
/// `links` (or the built-in defaults when `links` is empty).
inline CommOptions comm_from_json(const json& j, const std::vector<LinkModel>& links = {},
                                  const std::string& where = "comm") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  CommOptions c;
  const detail::Node link = root["link"];
  if (link.raw().is_string()) {
    LinkMode mode{};
    try {
      mode = link_mode_from_string(link.string());
    } catch (const InputError& e) {
      throw InputError(link.path() + ": " + e.what());
    }
    c.link = default_link(mode);
    for (const auto& l : links) {
      if (l.mode == mode) c.link = l;
    }
  } else {
    c.link = link_from_node(link);
  }
  if (root.has("method")) {
    try {
      c.method = reshard_method_from_string(root["method"].string());
    } catch (const InputError& e) {
      throw InputError(where + ".method: " + e.what());
    }
  }
  c.overlap_fraction = root.number_or("overlap_fraction", 0.0);
  c.activation_bytes = root.number_or("activation_bytes", 0.0);
  if (!(c.overlap_fraction >= 0.0 && c.overlap_fraction <= 1.0)) {
    throw InputError(where + ".overlap_fraction: must be in [0, 1]");
  }
  if (c.activation_bytes < 0.0) throw InputError(where + ".activation_bytes: must be >= 0");
  return c;
}

// ---------------------------------------------------------------- synthetic

inline json to_json(const std::string& name, const SyntheticChipParams& p) {
  json eff = json::array();
  for (const auto& [tp, e] : p.tp_efficiency) eff.push_back({{"tp", tp}, {"efficiency", e}});
  return {{"name", name},
          {"flops_ratio", p.flops_ratio},
          {"layer_state_bytes", p.layer_state_bytes},
          {"activation_bytes", p.activation_bytes},
          {"base_layer_seconds", p.base_layer_seconds},
          {"tp_max", p.tp_max},
          {"dp_values", p.dp_values},
          {"tp_efficiency", eff},
          {"recompute_activation_ratio", p.recompute_activation_ratio},
          {"update_fraction", p.update_fraction},
          {"sync_fraction", p.sync_fraction},
          {"optimizer_share", p.optimizer_share}};
}

inline std::vector<std::pair<std::string, SyntheticChipParams>> synthetic_from_json(
    const json& j, const std::string& where = "synthetic") {
  const detail::Node root(j, where);
  detail::check_schema(root);
  const detail::Node chips = root["chips"];
  std::vector<std::pair<std::string, SyntheticChipParams>> out;
  for (std::size_t i = 0; i < chips.size(); ++i) {
    const detail::Node c = chips[i];
    SyntheticChipParams p;
    p.flops_ratio = c["flops_ratio"].number();
    p.layer_state_bytes = c["layer_state_bytes"].number();
    p.activation_bytes = c["activation_bytes"].number();
    p.base_layer_seconds = c["base_layer_seconds"].number();
    p.tp_max = c["tp_max"].integer();
    const detail::Node dps = c["dp_values"];
    p.dp_values.clear();
    for (std::size_t k = 0; k < dps.size(); ++k) p.dp_values.push_back(dps[k].integer());
    if (c.has("tp_efficiency")) {
      const detail::Node eff = c["tp_efficiency"];
      for (std::size_t k = 0; k < eff.size(); ++k) {
        p.tp_efficiency[eff[k]["tp"].integer()] = eff[k]["efficiency"].number();
      }
    }
    p.recompute_activation_ratio = c.number_or("recompute_activation_ratio", p.recompute_activation_ratio);
    p.update_fraction = c.number_or("update_fraction", p.update_fraction);
    p.sync_fraction = c.number_or("sync_fraction", p.sync_fraction);
    p.optimizer_share = c.number_or("optimizer_share", p.optimizer_share);
    out.emplace_back(c["name"].string(), std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------- simulation

inline json to_json(const TraceMetrics& m, const ScheduleTrace& trace) {
  json stages = json::array();
  for (std::size_t i = 0; i < m.bubble_fraction.size(); ++i) {
    stages.push_back({{"stage", i + 1},
                      {"bubble_fraction", m.bubble_fraction[i]},
                      {"peak_in_flight", m.peak_in_flight[i]},
                      {"busy_time", trace.busy_time[i]}});
  }
  return detail::with_schema({{"iteration_time", m.iteration_time}, {"stages", stages}});
}

}  // namespace heteropp

#endif  // HETEROPP_IO_HPP_
