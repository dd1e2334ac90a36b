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

// Trace Event Format export of simulated schedules, viewable in
// chrome://tracing or Perfetto. One complete ("X") event per trace event;
// pid is the 1-based stage, tid 0 carries compute and tid 1 transfers.
// Exact start/end seconds ride along in "args" so files re-import losslessly.

#ifndef HETEROPP_TRACE_EXPORT_HPP_
#define HETEROPP_TRACE_EXPORT_HPP_

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heteropp/errors.hpp"
#include "heteropp/schedule_sim.hpp"

namespace heteropp {

inline nlohmann::json trace_to_json(const ScheduleTrace& trace) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : trace.events) {
    std::string name(to_string(e.kind));
    if (e.microbatch >= 0) name += ":" + std::to_string(e.microbatch);
    events.push_back({{"name", name},
                      {"ph", "X"},
                      {"ts", e.start * 1e6},
                      {"dur", (e.end - e.start) * 1e6},
                      {"pid", e.stage},
                      {"tid", is_compute(e.kind) ? 0 : 1},
                      {"args",
                       {{"kind", to_string(e.kind)},
                        {"microbatch", e.microbatch},
                        {"start_s", e.start},
                        {"end_s", e.end}}}});
  }
  return events;
}

/// Events of a Trace Event array. Records without exact-time args fall back
/// to the microsecond fields.
inline std::vector<TraceEvent> trace_events_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("trace: expected an array of events");
  std::vector<TraceEvent> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& r = j[i];
    const std::string where = "trace[" + std::to_string(i) + "]";
    try {
      TraceEvent e;
      e.stage = r.at("pid").get<int>();
      const std::string name = r.at("name").get<std::string>();
      const auto colon = name.find(':');
      const auto* args = r.contains("args") ? &r.at("args") : nullptr;
      if (args != nullptr && args->contains("kind")) {
        e.kind = event_kind_from_string(args->at("kind").get<std::string>());
        e.microbatch = args->at("microbatch").get<int>();
        e.start = args->at("start_s").get<double>();
        e.end = args->at("end_s").get<double>();
      } else {
        e.kind = event_kind_from_string(name.substr(0, colon));
        e.microbatch = colon == std::string::npos ? -1 : std::stoi(name.substr(colon + 1));
        e.start = r.at("ts").get<double>() * 1e-6;
        e.end = e.start + r.at("dur").get<double>() * 1e-6;
      }
      out.push_back(e);
    } catch (const nlohmann::json::exception& ex) {
      throw InputError(where + ": " + ex.what());
    } catch (const std::logic_error& ex) {
      throw InputError(where + ": " + ex.what());
    }
  }
  return out;
}

inline void export_trace(const ScheduleTrace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << trace_to_json(trace).dump(1) << '\n';
  if (!f) throw Error("write to '" + path + "' failed");
}

inline std::vector<TraceEvent> import_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(path + ": " + ex.what());
  }
  return trace_events_from_json(j);
}

}  // namespace heteropp

#endif  // HETEROPP_TRACE_EXPORT_HPP_
