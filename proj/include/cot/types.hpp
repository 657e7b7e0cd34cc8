// Copyright 2026 The cotsolve authors
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

#ifndef COT_TYPES_HPP_
#define COT_TYPES_HPP_

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Malformed problem data (dimensions, signs, non-finite entries, bad files).
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

// A quantity left the representable range of double (caller should reduce
// eta or rescale the dual variables).
class NumericalOverflow : public std::runtime_error {
 public:
  explicit NumericalOverflow(const std::string& what)
      : std::runtime_error(what) {}
};

// An iterative procedure could not make progress (zero row sums, collapsed
// line search).  Solvers report this through SolveStatus instead of throwing
// whenever a partial result exists.
class NumericalFailure : public std::runtime_error {
 public:
  explicit NumericalFailure(const std::string& what)
      : std::runtime_error(what) {}
};

// The linear program has an empty feasible set.
class Infeasible : public std::runtime_error {
 public:
  explicit Infeasible(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cot

#endif  // COT_TYPES_HPP_
