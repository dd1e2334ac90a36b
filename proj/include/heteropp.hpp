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

#ifndef HETEROPP_HPP_
#define HETEROPP_HPP_

#include "heteropp/cluster.hpp"
#include "heteropp/comm_model.hpp"
#include "heteropp/cost_model.hpp"
#include "heteropp/errors.hpp"
#include "heteropp/instance_gen.hpp"
#include "heteropp/io.hpp"
#include "heteropp/layer_sharding.hpp"
#include "heteropp/metrics.hpp"
#include "heteropp/oracle.hpp"
#include "heteropp/plan.hpp"
#include "heteropp/profile.hpp"
#include "heteropp/schedule_sim.hpp"
#include "heteropp/search.hpp"
#include "heteropp/trace_export.hpp"

#endif  // HETEROPP_HPP_
