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

// Discrete-event simulation of one 1F1B training iteration over a
// heterogeneous pipeline.
//
// Stage s of p runs min(p - s, b) warmup forwards, alternates one forward and
// one backward, then drains the remaining backwards; it therefore holds at most
// min(b, p - s + 1) microbatches between forward and backward, the same count
// the memory model charges. Activations and gradients cross stage boundaries
// as transfer events whose visible duration is (1 - overlap) times the modeled
// transfer time. Each stage starts its optimizer update right after its own
// last backward.

#ifndef HETEROPP_SCHEDULE_SIM_HPP_
#define HETEROPP_SCHEDULE_SIM_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/comm_model.hpp"
#include "heteropp/cost_model.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/plan.hpp"
#include "heteropp/profile.hpp"

namespace heteropp {

enum class EventKind { kForward, kRecompute, kBackward, kTransferFwd, kTransferBwd, kUpdate };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kForward:
      return "forward";
    case EventKind::kRecompute:
      return "recompute";
    case EventKind::kBackward:
      return "backward";
    case EventKind::kTransferFwd:
      return "transfer_fwd";
    case EventKind::kTransferBwd:
      return "transfer_bwd";
    case EventKind::kUpdate:
      return "update";
  }
  return "?";
}

inline EventKind event_kind_from_string(std::string_view s) {
  for (EventKind k : {EventKind::kForward, EventKind::kRecompute, EventKind::kBackward,
                      EventKind::kTransferFwd, EventKind::kTransferBwd, EventKind::kUpdate}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown event kind '" + std::string(s) + "'");
}

inline bool is_compute(EventKind k) {
  return k != EventKind::kTransferFwd && k != EventKind::kTransferBwd;
}

struct TraceEvent {
  int stage = 0;        // 1-based; the sending stage for transfers
  int microbatch = -1;  // 0-based; -1 for update
  EventKind kind = EventKind::kForward;
  double start = 0.0;
  double end = 0.0;

  bool operator==(const TraceEvent&) const = default;
};

struct ScheduleTrace {
  std::vector<TraceEvent> events;
  double iteration_time = 0.0;
  std::vector<int> peak_in_flight;  // per stage
  std::vector<double> busy_time;    // per stage, compute and update
};

/// Communication settings of a simulation. The default is free communication.
struct CommOptions {
  LinkModel link{LinkMode::kDeviceDirectRdma, 0.0, 1.0, 0.0};
  ReshardMethod method = ReshardMethod::kSendRecvAllGather;
  double overlap_fraction = 0.0;  // share of transfer time hidden by compute
  double activation_bytes = 0.0;  // stage-boundary activation per microbatch
};

/// Modeled time to move one microbatch's boundary tensor from group `src` to
/// group `dst`. Same chip and TP on both sides is a plain P2P transfer;
/// anything else is resharded.
inline double boundary_transfer_time(const StageGroup& src, const StageGroup& dst,
                                     const ClusterSpec& cluster, const CommOptions& comm) {
  if (src.chip == dst.chip && src.tp == dst.tp) {
    return p2p_transfer_time(comm.activation_bytes, comm.link);
  }
  const ChipTypeSpec* d = cluster.find(dst.chip);
  if (d == nullptr) throw InputError("unknown chip '" + dst.chip + "'");
  return resharding_time(comm.activation_bytes, src.tp, dst.tp, d->nic_count_per_node, comm.link,
                         d->intra_node_bandwidth, comm.method);
}

namespace detail {

struct StageTimes {
  double fwd = 0.0;
  double recomp = 0.0;  // zero without recomputation
  double bwd = 0.0;
  double update = 0.0;
};

struct Op {
  bool forward;
  int mb;
};

/// 1F1B order of one stage.
inline std::vector<Op> one_f_one_b(int stage, int stages, int microbatches) {
  std::vector<Op> ops;
  const int warmup = std::min(stages - stage, microbatches);
  for (int m = 0; m < warmup; ++m) ops.push_back({true, m});
  for (int i = 0; i < microbatches - warmup; ++i) {
    ops.push_back({true, warmup + i});
    ops.push_back({false, i});
  }
  for (int m = microbatches - warmup; m < microbatches; ++m) ops.push_back({false, m});
  return ops;
}

class PipelineSim {
 public:
  PipelineSim(std::vector<StageTimes> times, std::vector<double> fwd_link,
              std::vector<double> bwd_link, int microbatches)
      : times_(std::move(times)),
        fwd_link_(std::move(fwd_link)),
        bwd_link_(std::move(bwd_link)),
        b_(microbatches),
        p_(static_cast<int>(times_.size())) {
    const auto n = static_cast<std::size_t>(p_);
    const auto nb = static_cast<std::size_t>(b_);
    for (int s = 1; s <= p_; ++s) ops_.push_back(one_f_one_b(s, p_, b_));
    next_.assign(n, 0);
    busy_.assign(n, false);
    fwd_ready_.assign(n, std::vector<char>(nb, 0));
    bwd_ready_.assign(n, std::vector<char>(nb, 0));
    in_flight_.assign(n, 0);
    trace_.peak_in_flight.assign(n, 0);
    trace_.busy_time.assign(n, 0.0);
    for (std::size_t m = 0; m < nb; ++m) fwd_ready_[0][m] = 1;
  }

  ScheduleTrace run() {
    for (int s = 0; s < p_; ++s) try_start(s, 0.0);
    while (!queue_.empty()) {
      const Pending ev = queue_.top();
      queue_.pop();
      const auto s = static_cast<std::size_t>(ev.stage);
      const auto m = static_cast<std::size_t>(ev.mb);
      switch (ev.what) {
        case What::kFwdArrives:
          fwd_ready_[s][m] = 1;
          try_start(ev.stage, ev.time);
          break;
        case What::kBwdArrives:
          bwd_ready_[s][m] = 1;
          try_start(ev.stage, ev.time);
          break;
        case What::kOpDone:
          finish(ev.stage, ev.forward, ev.mb, ev.time);
          break;
      }
    }
    for (int s = 0; s < p_; ++s) {
      if (next_[static_cast<std::size_t>(s)] != ops_[static_cast<std::size_t>(s)].size()) {
        throw Error("pipeline simulation deadlocked at stage " + std::to_string(s + 1));
      }
    }
    for (const auto& e : trace_.events) trace_.iteration_time = std::max(trace_.iteration_time, e.end);
    return std::move(trace_);
  }

 private:
  enum class What { kFwdArrives, kBwdArrives, kOpDone };

  struct Pending {
    double time;
    std::uint64_t seq;
    What what;
    int stage;  // 0-based
    int mb;
    bool forward;
    bool operator>(const Pending& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  void push(double time, What what, int stage, int mb, bool forward = false) {
    queue_.push({time, seq_++, what, stage, mb, forward});
  }

  void record(int stage, int mb, EventKind kind, double start, double end) {
    trace_.events.push_back({stage + 1, mb, kind, start, end});
    if (is_compute(kind)) trace_.busy_time[static_cast<std::size_t>(stage)] += end - start;
  }

  void try_start(int stage, double now) {
    const auto s = static_cast<std::size_t>(stage);
    if (busy_[s] || next_[s] == ops_[s].size()) return;
    const Op op = ops_[s][next_[s]];
    const auto m = static_cast<std::size_t>(op.mb);
    const StageTimes& t = times_[s];
    if (op.forward) {
      if (!fwd_ready_[s][m]) return;
      record(stage, op.mb, EventKind::kForward, now, now + t.fwd);
      push(now + t.fwd, What::kOpDone, stage, op.mb, true);
    } else {
      if (!bwd_ready_[s][m]) return;
      double at = now;
      if (t.recomp > 0.0) {
        record(stage, op.mb, EventKind::kRecompute, at, at + t.recomp);
        at += t.recomp;
      }
      record(stage, op.mb, EventKind::kBackward, at, at + t.bwd);
      push(at + t.bwd, What::kOpDone, stage, op.mb, false);
    }
    busy_[s] = true;
    ++next_[s];
  }

  void finish(int stage, bool forward, int mb, double now) {
    const auto s = static_cast<std::size_t>(stage);
    busy_[s] = false;
    if (forward) {
      trace_.peak_in_flight[s] = std::max(trace_.peak_in_flight[s], ++in_flight_[s]);
      if (stage + 1 < p_) {
        const double d = fwd_link_[s];
        record(stage, mb, EventKind::kTransferFwd, now, now + d);
        push(now + d, What::kFwdArrives, stage + 1, mb);
      } else {
        bwd_ready_[s][static_cast<std::size_t>(mb)] = 1;
      }
    } else {
      --in_flight_[s];
      if (stage > 0) {
        const double d = bwd_link_[s - 1];
        record(stage, mb, EventKind::kTransferBwd, now, now + d);
        push(now + d, What::kBwdArrives, stage - 1, mb);
      }
    }
    if (next_[s] == ops_[s].size()) {
      record(stage, -1, EventKind::kUpdate, now, now + times_[s].update);
      return;
    }
    try_start(stage, now);
  }

  std::vector<StageTimes> times_;
  std::vector<double> fwd_link_;  // [s]: stage s -> s+1
  std::vector<double> bwd_link_;  // [s]: stage s+1 -> s
  int b_;
  int p_;
  std::vector<std::vector<Op>> ops_;
  std::vector<std::size_t> next_;
  std::vector<bool> busy_;
  std::vector<std::vector<char>> fwd_ready_, bwd_ready_;
  std::vector<int> in_flight_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  ScheduleTrace trace_;
};

}  // namespace detail

/// Simulates one iteration of a feasible plan. Throws Infeasible for a plan
/// that fails check_plan_feasibility.
inline ScheduleTrace simulate_iteration(const ParallelPlan& plan, const ClusterSpec& cluster,
                                        const ProfileTable& profile, const WorkloadSpec& workload,
                                        const CommOptions& comm = {}) {
  if (!(comm.overlap_fraction >= 0.0 && comm.overlap_fraction <= 1.0)) {
    throw InputError("overlap_fraction must be in [0, 1]");
  }
  if (comm.activation_bytes < 0.0) throw InputError("activation_bytes must be non-negative");
  const FeasibilityVerdict v = check_plan_feasibility(plan, cluster, profile, workload);
  if (!v) throw Infeasible("plan rejected: " + v.violation);

  std::vector<detail::StageTimes> times;
  std::vector<const StageGroup*> group_of;
  for (const auto& g : plan.groups) {
    const ProfileEntry e = lookup_profile(profile, g.chip, plan.dp, g.tp, g.recompute);
    const int lps = g.layers_per_stage();
    detail::StageTimes t{detail::scaled(lps, e.t_fwd), g.recompute ? detail::scaled(lps, e.t_recomp) : 0.0,
                         detail::scaled(lps, e.t_bwd), detail::scaled(lps, e.t_update)};
    for (int k = 0; k < g.pp; ++k) {
      times.push_back(t);
      group_of.push_back(&g);
    }
  }
  const double hidden = 1.0 - comm.overlap_fraction;
  std::vector<double> fwd_link, bwd_link;
  for (std::size_t s = 0; s + 1 < times.size(); ++s) {
    const StageGroup& a = *group_of[s];
    const StageGroup& b = *group_of[s + 1];
    fwd_link.push_back(hidden * boundary_transfer_time(a, b, cluster, comm));
    bwd_link.push_back(hidden * boundary_transfer_time(b, a, cluster, comm));
  }
  return detail::PipelineSim(std::move(times), std::move(fwd_link), std::move(bwd_link),
                             plan.microbatches)
      .run();
}

struct TraceMetrics {
  std::vector<double> bubble_fraction;  // 1 - busy / iteration time, per stage
  std::vector<int> peak_in_flight;
  double iteration_time = 0.0;
};

inline TraceMetrics trace_metrics(const ScheduleTrace& trace) {
  TraceMetrics m;
  m.iteration_time = trace.iteration_time;
  m.peak_in_flight = trace.peak_in_flight;
  for (double busy : trace.busy_time) {
    m.bubble_fraction.push_back(trace.iteration_time > 0.0 ? 1.0 - busy / trace.iteration_time
                                                           : 0.0);
  }
  return m;
}

}  // namespace heteropp

#endif  // HETEROPP_SCHEDULE_SIM_HPP_
