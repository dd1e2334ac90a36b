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

// Latency-bandwidth model of cross-chip point-to-point transfers and of
// activation resharding between pipeline stages with different TP layouts.

#ifndef HETEROPP_COMM_MODEL_HPP_
#define HETEROPP_COMM_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "heteropp/cluster.hpp"
#include "heteropp/errors.hpp"

namespace heteropp {

enum class LinkMode { kCpuMediatedTcp, kCpuMediatedRdma, kDeviceDirectRdma };

inline std::string_view to_string(LinkMode m) {
  switch (m) {
    case LinkMode::kCpuMediatedTcp:
      return "cpu_mediated_tcp";
    case LinkMode::kCpuMediatedRdma:
      return "cpu_mediated_rdma";
    case LinkMode::kDeviceDirectRdma:
      return "device_direct_rdma";
  }
  return "?";
}

inline LinkMode link_mode_from_string(std::string_view s) {
  if (s == "cpu_mediated_tcp") return LinkMode::kCpuMediatedTcp;
  if (s == "cpu_mediated_rdma") return LinkMode::kCpuMediatedRdma;
  if (s == "device_direct_rdma") return LinkMode::kDeviceDirectRdma;
  throw InputError("unknown link mode '" + std::string(s) + "'");
}

struct LinkModel {
  LinkMode mode = LinkMode::kDeviceDirectRdma;
  double base_latency = 0.0;     // seconds
  double bandwidth = 1.0;        // bytes/second
  double staging_penalty = 0.0;  // seconds/byte of host copies; 0 for device-direct

  bool operator==(const LinkModel&) const = default;
};

inline void validate_link(const LinkModel& l) {
  const std::string name(to_string(l.mode));
  if (!(l.bandwidth > 0.0) || !std::isfinite(l.bandwidth)) {
    throw InputError("link " + name + ": bandwidth must be positive");
  }
  if (!(l.base_latency >= 0.0) || !std::isfinite(l.base_latency)) {
    throw InputError("link " + name + ": base latency must be non-negative");
  }
  const bool direct = l.mode == LinkMode::kDeviceDirectRdma;
  if (direct && l.staging_penalty != 0.0) {
    throw InputError("link " + name + ": device-direct links have no staging penalty");
  }
  if (!direct && !(l.staging_penalty > 0.0)) {
    throw InputError("link " + name + ": CPU-mediated links need a positive staging penalty");
  }
}

/// Default calibration. SYNTHETIC: fitted so that TCP over device-direct RDMA
/// averages about 9.9x (geometric mean over 4 KiB..256 MiB), with every
/// per-size ratio between 8.4x and 13.8x. Device-direct bandwidth is the
/// measured NIC-affinity throughput of 9.56 GB/s.
inline LinkModel default_link(LinkMode mode) {
  switch (mode) {
    case LinkMode::kCpuMediatedTcp:
      return {mode, 140e-6, 1.25e9, 1.0 / 12e9};
    case LinkMode::kCpuMediatedRdma:
      return {mode, 40e-6, 9.56e9, 1.0 / 12e9};
    case LinkMode::kDeviceDirectRdma:
      return {mode, 10e-6, 9.56e9, 0.0};
  }
  throw InputError("unknown link mode");
}

inline std::vector<LinkModel> default_links() {
  return {default_link(LinkMode::kCpuMediatedTcp), default_link(LinkMode::kCpuMediatedRdma),
          default_link(LinkMode::kDeviceDirectRdma)};
}

/// base_latency + bytes * (1 / bandwidth + staging_penalty)
inline double p2p_transfer_time(double bytes, const LinkModel& link) {
  if (bytes < 0.0) throw InputError("p2p_transfer_time: negative size");
  return link.base_latency + bytes * (1.0 / link.bandwidth + link.staging_penalty);
}

enum class ReshardMethod { kNaive, kSendRecvAllGather };

inline std::string_view to_string(ReshardMethod m) {
  return m == ReshardMethod::kNaive ? "naive" : "send_recv_all_gather";
}

inline ReshardMethod reshard_method_from_string(std::string_view s) {
  if (s == "naive") return ReshardMethod::kNaive;
  if (s == "send_recv_all_gather") return ReshardMethod::kSendRecvAllGather;
  throw InputError("unknown resharding method '" + std::string(s) + "'");
}

/// Moves one stage-boundary activation between TP groups.
///
/// naive: the whole activation crosses the link once.
/// send_recv_all_gather: k = min(tp_dst, dst_nic_count) source chips each send
/// a 1/k shard over parallel NIC streams, then the destination all-gathers
/// inside the node at `intra_bandwidth`. Source activations are replicated
/// after the TP all-reduce, so the sender side needs no gather.
inline double resharding_time(double activation_bytes, int tp_src, int tp_dst, int dst_nic_count,
                              const LinkModel& link, double intra_bandwidth,
                              ReshardMethod method) {
  if (!is_power_of_two(tp_src) || !is_power_of_two(tp_dst)) {
    throw InputError("resharding_time: tp must be a power of two");
  }
  if (dst_nic_count < 1) throw InputError("resharding_time: need at least one NIC");
  if (!(intra_bandwidth > 0.0)) throw InputError("resharding_time: intra bandwidth must be positive");
  if (method == ReshardMethod::kNaive) return p2p_transfer_time(activation_bytes, link);
  const int k = std::min(tp_dst, dst_nic_count);
  const double all_gather = activation_bytes * (k - 1) / (k * intra_bandwidth);
  return p2p_transfer_time(activation_bytes / k, link) + all_gather;
}

enum class BandwidthClass { kAffinity, kNonAffinity };

struct NicAssignment {
  std::vector<int> nic;                    // per chip
  std::vector<BandwidthClass> bandwidth_class;
  std::vector<double> bandwidth;           // effective per-chip bytes/s
  std::vector<int> load;                   // chips per NIC
};

/// Gives every chip its affinity NIC while NIC loads stay balanced (max - min
/// <= 1); chips that lose the contention or have no valid preference go to
/// the least-loaded NIC and are classed non-affinity. Per-chip bandwidth is
/// the class bandwidth shared by the chips on that NIC.
inline NicAssignment assign_nics(int chips, int nic_count, const std::vector<int>& affinity,
                                 double affinity_bandwidth, double non_affinity_bandwidth) {
  if (nic_count < 1) throw InputError("assign_nics: need at least one NIC");
  if (chips < 0) throw InputError("assign_nics: negative chip count");
  const auto n = static_cast<std::size_t>(chips);
  const auto k = static_cast<std::size_t>(nic_count);
  const int floor_quota = chips / nic_count;
  int extra_slots = chips % nic_count;  // NICs allowed to carry floor + 1

  NicAssignment out;
  out.nic.assign(n, -1);
  out.bandwidth_class.assign(n, BandwidthClass::kNonAffinity);
  out.bandwidth.assign(n, 0.0);
  out.load.assign(k, 0);
  auto preferred = [&](std::size_t c) {
    return c < affinity.size() && affinity[c] >= 0 && affinity[c] < nic_count ? affinity[c] : -1;
  };
  for (std::size_t c = 0; c < n; ++c) {
    const int p = preferred(c);
    if (p >= 0 && out.load[static_cast<std::size_t>(p)] < floor_quota) {
      out.nic[c] = p;
      ++out.load[static_cast<std::size_t>(p)];
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    const int p = preferred(c);
    if (out.nic[c] >= 0 || p < 0) continue;
    if (out.load[static_cast<std::size_t>(p)] == floor_quota && extra_slots > 0) {
      out.nic[c] = p;
      ++out.load[static_cast<std::size_t>(p)];
      --extra_slots;
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (out.nic[c] >= 0) continue;
    const auto least = static_cast<std::size_t>(
        std::min_element(out.load.begin(), out.load.end()) - out.load.begin());
    out.nic[c] = static_cast<int>(least);
    ++out.load[least];
  }
  for (std::size_t c = 0; c < n; ++c) {
    const bool aff = out.nic[c] == preferred(c);
    out.bandwidth_class[c] = aff ? BandwidthClass::kAffinity : BandwidthClass::kNonAffinity;
    const double bw = aff ? affinity_bandwidth : non_affinity_bandwidth;
    out.bandwidth[c] = bw / out.load[static_cast<std::size_t>(out.nic[c])];
  }
  return out;
}

/// NIC assignment of one node of `chip`, with chips numbered so that chip c
/// prefers NIC c * nics / chips_per_node.
inline NicAssignment assign_node_nics(const ChipTypeSpec& chip) {
  std::vector<int> affinity(static_cast<std::size_t>(chip.chips_per_node));
  for (int c = 0; c < chip.chips_per_node; ++c) {
    affinity[static_cast<std::size_t>(c)] = c * chip.nic_count_per_node / chip.chips_per_node;
  }
  return assign_nics(chip.chips_per_node, chip.nic_count_per_node, affinity,
                     chip.affinity_bandwidth, chip.non_affinity_bandwidth);
}

}  // namespace heteropp

#endif  // HETEROPP_COMM_MODEL_HPP_
