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


#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace heteropp {
namespace {

TEST(HeteroSpeedupRatio, WeightedMeanGivesOne) {
  const std::vector<BaselineThroughput> b{{256, 136.9}, {256, 143.7}, {256, 46.2}, {256, 99.5}};
  const double mean = (136.9 + 143.7 + 46.2 + 99.5) / 4;
  EXPECT_NEAR(hetero_speedup_ratio(mean, 1024, b), 1.0, 1e-15);
}

TEST(HeteroSpeedupRatio, ThreeTypeCluster) {
  const std::vector<BaselineThroughput> b{{256, 136.9}, {256, 143.7}, {256, 46.2}};
  EXPECT_NEAR(hetero_speedup_ratio(118.77, 768, b), 1.0903, 0.001);
  EXPECT_NEAR(hetero_speedup_ratio(118.76, 768, b), 1.0903, 0.001);
}

TEST(HeteroSpeedupRatio, LinearAndScaleInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1.0, 500.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<BaselineThroughput> b;
    int total = 0;
    for (int k = 0; k < 3; ++k) {
      const int n = 8 * (1 + static_cast<int>(rng() % 32));
      b.push_back({n, u(rng)});
      total += n;
    }
    const double h = u(rng);
    const double r = hetero_speedup_ratio(h, total, b);
    EXPECT_TRUE(testing::near_rel(hetero_speedup_ratio(3 * h, total, b), 3 * r, 1e-14));
    std::vector<BaselineThroughput> scaled = b;
    for (auto& x : scaled) x.tgs *= 7.5;
    EXPECT_TRUE(testing::near_rel(hetero_speedup_ratio(7.5 * h, total, scaled), r, 1e-14));
  }
}

TEST(HeteroSpeedupRatio, RejectsBadInput) {
  EXPECT_THROW(hetero_speedup_ratio(1.0, 8, {}), InputError);
  EXPECT_THROW(hetero_speedup_ratio(0.0, 8, {{8, 1.0}}), InputError);
  EXPECT_THROW(hetero_speedup_ratio(1.0, 8, {{0, 1.0}}), InputError);
  EXPECT_THROW(hetero_speedup_ratio(1.0, 8, {{8, -1.0}}), InputError);
}

TEST(TgsFromIteration, TokensPerChipPerSecond) {
  EXPECT_DOUBLE_EQ(tgs_from_iteration(512, 4096, 16.0, 1024), 128.0);
  EXPECT_THROW(tgs_from_iteration(1, 1, 0.0, 1), InputError);
}

TEST(MeanRelativeError, SmallExample) {
  EXPECT_DOUBLE_EQ(mean_relative_error({2.0, 4.0}, {1.0, 4.0}), 0.25);
  EXPECT_EQ(mean_relative_error({3.0, 1.5}, {3.0, 1.5}), 0.0);
}

TEST(MeanRelativeError, BelowThreshold) {
  std::vector<double> ref, cand;
  for (int i = 0; i < 100; ++i) {
    ref.push_back(10.0 - 0.05 * i);
    cand.push_back(ref.back() * (i % 2 == 0 ? 1.00391 : 0.99609));
  }
  const double mre = mean_relative_error(ref, cand);
  EXPECT_NEAR(mre, 0.00391, 1e-12);
  EXPECT_LT(mre, 0.015);
}

TEST(MeanRelativeError, Errors) {
  EXPECT_THROW(mean_relative_error({1.0}, {1.0, 2.0}), InputError);
  EXPECT_THROW(mean_relative_error({}, {}), InputError);
  try {
    mean_relative_error({1.0, 0.0}, {1.0, 1.0});
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
}

TEST(ReadSeries, DelimitersHeaderAndComments) {
  std::istringstream in("iteration,loss\n# warmup\n1,2.5\n2;2.25\n3\t2.0\n4 1.75  # tail\n\n");
  const Series s = read_series(in);
  EXPECT_EQ(s.x, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(s.y, (std::vector<double>{2.5, 2.25, 2.0, 1.75}));
}

TEST(ReadSeries, ReportsLine) {
  std::istringstream in("1,2\n2,x\n");
  try {
    read_series(in, "loss.csv");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("loss.csv:2"), std::string::npos) << e.what();
  }
  std::istringstream extra("1,2\n3,4,5\n");
  EXPECT_THROW(read_series(extra), InputError);
  EXPECT_THROW(read_series_file("/nonexistent/series.csv"), InputError);
}

}  // namespace
}  // namespace heteropp
