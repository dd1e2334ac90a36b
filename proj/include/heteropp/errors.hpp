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

#ifndef HETEROPP_ERRORS_HPP_
#define HETEROPP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace heteropp {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (cluster/workload/profile/plan files,
/// bad arguments). Maps to CLI exit status 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Exact-key profile lookup failed.
class ProfileEntryAbsent : public Error {
 public:
  using Error::Error;
};

/// No assignment satisfies the constraints (search, sharding, simulation of an
/// infeasible plan). Maps to CLI exit status 1.
class Infeasible : public Error {
 public:
  using Error::Error;
};

}  // namespace heteropp

#endif  // HETEROPP_ERRORS_HPP_
