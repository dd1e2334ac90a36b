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

// Evaluation formulas: heterogeneous speedup ratio, mean relative error of
// loss curves, and throughput conversion. Throughput is in TGS, tokens per
// chip per second.

#ifndef HETEROPP_METRICS_HPP_
#define HETEROPP_METRICS_HPP_

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "heteropp/errors.hpp"

namespace heteropp {

struct BaselineThroughput {
  int chips = 0;
  double tgs = 0.0;
};

/// (total_chips * hetero_tgs) / sum_i N_i * TGS_i
inline double hetero_speedup_ratio(double hetero_tgs, int total_chips,
                                   const std::vector<BaselineThroughput>& baselines) {
  if (!(hetero_tgs > 0.0) || total_chips < 1) {
    throw InputError("hetero_speedup_ratio: throughput and chip count must be positive");
  }
  double denom = 0.0;
  for (const auto& b : baselines) {
    if (b.chips < 1 || !(b.tgs > 0.0)) {
      throw InputError("hetero_speedup_ratio: baseline chips and throughput must be positive");
    }
    denom += b.chips * b.tgs;
  }
  if (denom == 0.0) throw InputError("hetero_speedup_ratio: no baselines");
  return total_chips * hetero_tgs / denom;
}

/// Tokens per chip per second of an iteration that processes
/// `microbatches` sequences of `seq_len` tokens in `iteration_time` seconds.
inline double tgs_from_iteration(int microbatches, int seq_len, double iteration_time, int chips) {
  if (microbatches < 1 || seq_len < 1 || chips < 1 || !(iteration_time > 0.0)) {
    throw InputError("tgs_from_iteration: all inputs must be positive");
  }
  return static_cast<double>(microbatches) * seq_len / (iteration_time * chips);
}

/// (1/n) sum |y_i - yhat_i| / |y_i|
inline double mean_relative_error(const std::vector<double>& reference,
                                  const std::vector<double>& candidate) {
  if (reference.size() != candidate.size()) {
    throw InputError("mean_relative_error: series lengths differ (" +
                     std::to_string(reference.size()) + " vs " +
                     std::to_string(candidate.size()) + ")");
  }
  if (reference.empty()) throw InputError("mean_relative_error: empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (reference[i] == 0.0) {
      throw InputError("mean_relative_error: zero reference value at index " + std::to_string(i));
    }
    sum += std::abs(reference[i] - candidate[i]) / std::abs(reference[i]);
  }
  return sum / static_cast<double>(reference.size());
}

struct Series {
  std::vector<double> x;  // iteration
  std::vector<double> y;  // value
};

/// Two-column text separated by commas, tabs, semicolons or spaces. Blank
/// lines and '#' comments are skipped, as is a non-numeric first row.
inline Series read_series(std::istream& in, const std::string& name = "series") {
  Series s;
  std::string line;
  int lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t' || c == '\r') c = ' ';
    }
    std::istringstream row(line);
    std::string a, b, extra;
    if (!(row >> a)) continue;
    const bool has_b = static_cast<bool>(row >> b);
    auto number = [](const std::string& t, double& v) {
      char* end = nullptr;
      v = std::strtod(t.c_str(), &end);
      return !t.empty() && end == t.c_str() + t.size();
    };
    double x = 0.0, y = 0.0;
    const bool ok = has_b && number(a, x) && number(b, y) && !(row >> extra);
    if (!ok) {
      if (first && has_b) {
        first = false;
        continue;
      }
      throw InputError(name + ":" + std::to_string(lineno) + ": expected two numeric columns");
    }
    first = false;
    s.x.push_back(x);
    s.y.push_back(y);
  }
  return s;
}

inline Series read_series_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open '" + path + "'");
  return read_series(f, path);
}

}  // namespace heteropp

#endif  // HETEROPP_METRICS_HPP_
