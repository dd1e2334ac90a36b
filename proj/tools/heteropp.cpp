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

// heteropp command-line driver.
//
// Exit status: 0 success, 1 infeasible / no plan / oracle disagreement,
// 2 input error.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "heteropp.hpp"

namespace {

using namespace heteropp;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 1;
constexpr int kExitInput = 2;

const char* const kFormats =
    "\nFiles are JSON documents with \"schema\": 1 (bytes, seconds, bytes/s):\n"
    "  cluster   chip_types[]: name, count, safe_memory_bytes, tp_max, chips_per_node,\n"
    "            nic_count_per_node, affinity_bandwidth_Bps, non_affinity_bandwidth_Bps,\n"
    "            intra_node_bandwidth_Bps\n"
    "  workload  total_layers, global_batch (or global_batch_tokens + seq_len),\n"
    "            bubble_coefficient, pipeline_overhead_s\n"
    "  profile   chips.<name>: tp_max, times[], update[], act_memory[], model_memory[]\n"
    "  plan      dp, microbatches, stages[]: chip, tp, recompute, layers_per_stage, group\n"
    "  comm      link (mode name or object), method, overlap_fraction, activation_bytes\n"
    "  links     links[]: mode, base_latency_s, bandwidth_Bps, staging_penalty_s_per_B\n"
    "Series files for `metrics` are two delimited columns (iteration, value).\n";

struct InstanceFiles {
  std::string cluster, profile, workload;

  void add_to(CLI::App* cmd, bool required) {
    auto* c = cmd->add_option("--cluster", cluster, "cluster file")->check(CLI::ExistingFile);
    auto* p = cmd->add_option("--profile", profile, "profile file")->check(CLI::ExistingFile);
    auto* w = cmd->add_option("--workload", workload, "workload file")->check(CLI::ExistingFile);
    if (required) {
      c->required();
      p->required();
      w->required();
    }
  }

  bool given() const { return !cluster.empty() || !profile.empty() || !workload.empty(); }

  Instance load() const {
    if (cluster.empty() || profile.empty() || workload.empty()) {
      throw InputError("--cluster, --profile and --workload must be given together");
    }
    Instance inst;
    inst.cluster = cluster_from_json(load_json(cluster), cluster);
    inst.profile = profile_from_json(load_json(profile), profile);
    inst.workload = workload_from_json(load_json(workload), workload);
    validate_profile(inst.profile, inst.cluster);
    return inst;
  }
};

void print_plan(const ParallelPlan& plan, const CostBreakdown& cost) {
  std::printf("iteration time %.6f s  dp=%d microbatches=%d stages=%d\n", cost.total, plan.dp,
              plan.microbatches, plan.num_stages());
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& grp = plan.groups[g];
    std::printf("  group %zu  %-10s pp=%-3d tp=%-2d recompute=%d layers=%d (%d/stage)\n", g,
                grp.chip.c_str(), grp.pp, grp.tp, grp.recompute ? 1 : 0, grp.layers,
                grp.layers_per_stage());
  }
  std::printf("  bottleneck stage(s):");
  for (int s : cost.argmax_stages()) std::printf(" %d", s);
  std::printf("\n");
}

struct PlanArgs {
  InstanceFiles files;
  bool two_stage = false;
  int group_size = 128;
  std::optional<double> alpha;
  int workers = 1;
  std::string out;
};

int run_plan(const PlanArgs& a) {
  Instance inst = a.files.load();
  if (a.alpha) inst.workload.bubble_coefficient = *a.alpha;
  validate_workload(inst.workload);
  SearchOptions opts;
  opts.workers = a.workers;
  SearchResult result;
  if (a.two_stage) {
    TwoStageResult r = two_stage_search(inst.cluster, inst.profile, inst.workload, a.group_size, opts);
    std::printf("stage 1: %.6f s%s\n", r.stage1.cost.total,
                r.used_stage2 ? "; stage 2 refinement kept" : "");
    result = r.best;
  } else {
    result = search_plan(inst.cluster, inst.profile, inst.workload, opts);
  }
  print_plan(result.plan, result.cost);
  if (!a.out.empty()) save_json(to_json(result.plan, &result.cost), a.out);
  return kExitOk;
}

struct SimArgs {
  InstanceFiles files;
  std::string plan, comm, links, out, trace_out;
};

int run_simulate(const SimArgs& a) {
  const Instance inst = a.files.load();
  const ParallelPlan plan = plan_from_json(load_json(a.plan), a.plan);
  std::vector<LinkModel> links;
  if (!a.links.empty()) links = links_from_json(load_json(a.links), a.links);
  CommOptions comm;
  if (!a.comm.empty()) comm = comm_from_json(load_json(a.comm), links, a.comm);
  const ScheduleTrace trace = simulate_iteration(plan, inst.cluster, inst.profile, inst.workload, comm);
  const TraceMetrics m = trace_metrics(trace);
  const CostBreakdown model = estimate_iteration_time(plan, inst.profile, inst.workload);
  std::printf("simulated %.6f s  modeled %.6f s  deviation %+.3f%%\n", m.iteration_time, model.total,
              100.0 * (model.total - m.iteration_time) / m.iteration_time);
  for (std::size_t s = 0; s < m.bubble_fraction.size(); ++s) {
    std::printf("  stage %-3zu bubble %.4f  peak in flight %d\n", s + 1, m.bubble_fraction[s],
                m.peak_in_flight[s]);
  }
  if (!a.out.empty()) {
    json j = to_json(m, trace);
    j["model_iteration_time"] = model.total;
    save_json(j, a.out);
  }
  if (!a.trace_out.empty()) export_trace(trace, a.trace_out);
  return kExitOk;
}

struct ValidateArgs {
  InstanceFiles files;
  std::optional<std::uint64_t> seed;
};

int run_validate(const ValidateArgs& a) {
  if (a.seed.has_value() == a.files.given()) {
    throw InputError("validate needs either --seed or the three instance files");
  }
  const Instance inst = a.seed ? random_instance(*a.seed) : a.files.load();
  std::optional<SearchResult> searched, oracle;
  try {
    searched = search_plan(inst.cluster, inst.profile, inst.workload);
  } catch (const Infeasible&) {
  }
  try {
    oracle = brute_force_oracle(inst.cluster, inst.profile, inst.workload);
  } catch (const Infeasible&) {
  }
  if (!searched && !oracle) {
    std::printf("AGREE no feasible plan\n");
    return kExitInfeasible;
  }
  if (searched && oracle && searched->cost.total == oracle->cost.total) {
    std::printf("AGREE search %.17g oracle %.17g\n", searched->cost.total, oracle->cost.total);
    return kExitOk;
  }
  std::printf("DISAGREE search %s oracle %s\n",
              searched ? std::to_string(searched->cost.total).c_str() : "infeasible",
              oracle ? std::to_string(oracle->cost.total).c_str() : "infeasible");
  return kExitInfeasible;
}

struct SpeedupArgs {
  double hetero_tgs = 0.0;
  int total_chips = 0;
  std::string baselines;
};

int run_speedup(const SpeedupArgs& a) {
  const Series s = read_series_file(a.baselines);
  std::vector<BaselineThroughput> base;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    if (s.x[i] != std::floor(s.x[i])) {
      throw InputError(a.baselines + ": chip count on row " + std::to_string(i + 1) +
                       " is not an integer");
    }
    base.push_back({static_cast<int>(s.x[i]), s.y[i]});
  }
  std::printf("%.6f\n", hetero_speedup_ratio(a.hetero_tgs, a.total_chips, base));
  return kExitOk;
}

struct MreArgs {
  std::string reference, candidate;
  double threshold = 0.015;
};

int run_mre(const MreArgs& a) {
  const Series ref = read_series_file(a.reference);
  const Series cand = read_series_file(a.candidate);
  const double mre = mean_relative_error(ref.y, cand.y);
  std::printf("%.6f %s\n", mre, mre < a.threshold ? "within-threshold" : "exceeds-threshold");
  return kExitOk;
}

struct ProfileGenArgs {
  std::string params, out;
};

int run_profile_gen(const ProfileGenArgs& a) {
  ProfileTable table;
  for (const auto& [name, p] : synthetic_from_json(load_json(a.params), a.params)) {
    table.set_chip(name, synthesize_profile(p));
  }
  save_json(to_json(table), a.out);
  std::printf("wrote %zu chip profiles to %s\n", table.chips().size(), a.out.c_str());
  return kExitOk;
}

struct GenerateArgs {
  std::optional<std::uint64_t> seed;
  std::string catalogue;
  std::vector<int> counts;
  long long tokens = 2LL * 1024 * 1024;
  std::string out_dir;
};

int run_generate(const GenerateArgs& a) {
  if (a.seed.has_value() == !a.catalogue.empty()) {
    throw InputError("generate needs exactly one of --seed or --catalogue");
  }
  const Instance inst = a.seed ? random_instance(*a.seed)
                               : catalogue_instance(a.catalogue, a.counts, a.tokens);
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  save_json(to_json(inst.cluster), (dir / "cluster.json").string());
  save_json(to_json(inst.profile), (dir / "profile.json").string());
  save_json(to_json(inst.workload), (dir / "workload.json").string());
  std::printf("wrote cluster.json, profile.json, workload.json to %s\n", a.out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallelism planner for heterogeneous accelerator clusters"};
  app.footer(kFormats);
  app.require_subcommand(1);
  int status = kExitOk;

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "search the best plan for an instance");
  plan.files.add_to(plan_cmd, true);
  plan_cmd->add_flag("--two-stage", plan.two_stage, "refine with per-group splitting");
  plan_cmd->add_option("--group-size", plan.group_size, "chips per group in the second stage")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  plan_cmd->add_option("--alpha", plan.alpha, "bubble coefficient (default 1.0, or the workload's)")
      ->check(CLI::NonNegativeNumber);
  plan_cmd->add_option("--workers", plan.workers, "search threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  plan_cmd->add_option("--out", plan.out, "write plan and cost breakdown here");
  plan_cmd->callback([&] { status = run_plan(plan); });

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate one 1F1B iteration of a plan");
  sim.files.add_to(sim_cmd, true);
  sim_cmd->add_option("--plan", sim.plan, "plan file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--comm", sim.comm, "communication settings (default: free)")
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--links", sim.links, "link calibration file")->check(CLI::ExistingFile);
  sim_cmd->add_option("--out", sim.out, "write per-stage metrics here");
  sim_cmd->add_option("--trace-out", sim.trace_out, "write a Trace Event Format file here");
  sim_cmd->callback([&] { status = run_simulate(sim); });

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate", "compare search with the exhaustive oracle");
  val.files.add_to(val_cmd, false);
  val_cmd->add_option("--seed", val.seed, "generate a random instance from this seed");
  val_cmd->callback([&] { status = run_validate(val); });

  auto* met_cmd = app.add_subcommand("metrics", "evaluation formulas");
  met_cmd->require_subcommand(1);
  SpeedupArgs sp;
  auto* sp_cmd = met_cmd->add_subcommand("speedup-ratio", "heterogeneous speedup ratio");
  sp_cmd->add_option("--hetero-tgs", sp.hetero_tgs, "heterogeneous tokens/chip/s")->required();
  sp_cmd->add_option("--total-chips", sp.total_chips, "chips in the heterogeneous run")->required();
  sp_cmd->add_option("--baselines", sp.baselines, "rows of (chips, TGS)")
      ->required()
      ->check(CLI::ExistingFile);
  sp_cmd->callback([&] { status = run_speedup(sp); });
  MreArgs mre;
  auto* mre_cmd = met_cmd->add_subcommand("mre", "mean relative error of two loss series");
  mre_cmd->add_option("--reference", mre.reference, "reference series")
      ->required()
      ->check(CLI::ExistingFile);
  mre_cmd->add_option("--candidate", mre.candidate, "candidate series")
      ->required()
      ->check(CLI::ExistingFile);
  mre_cmd->add_option("--threshold", mre.threshold, "alignment threshold")->capture_default_str();
  mre_cmd->callback([&] { status = run_mre(mre); });

  ProfileGenArgs pg;
  auto* pg_cmd = app.add_subcommand("profile-gen", "synthesize a profile table");
  pg_cmd->add_option("--params", pg.params, "synthetic parameter file")
      ->required()
      ->check(CLI::ExistingFile);
  pg_cmd->add_option("--out", pg.out, "profile output file")->required();
  pg_cmd->callback([&] { status = run_profile_gen(pg); });

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic instance");
  gen_cmd->add_option("--seed", gen.seed, "random instance seed");
  gen_cmd->add_option("--catalogue", gen.catalogue, "catalogue chip letters, e.g. ABCD");
  gen_cmd->add_option("--counts", gen.counts, "chips per catalogue letter")->delimiter(',');
  gen_cmd->add_option("--tokens", gen.tokens, "global batch in tokens")->capture_default_str();
  gen_cmd->add_option("--out-dir", gen.out_dir, "output directory")->required();
  gen_cmd->callback([&] { status = run_generate(gen); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  } catch (const Infeasible& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return status;
}
