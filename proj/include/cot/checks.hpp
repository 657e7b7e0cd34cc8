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

#ifndef COT_CHECKS_HPP_
#define COT_CHECKS_HPP_

#include <string>
#include <vector>

#include "cot/model.hpp"
#include "cot/sinkhorn.hpp"

namespace cot {

enum class CheckStatus { kPass, kFail, kSkipped };

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  CheckStatus status = CheckStatus::kSkipped;
  std::string detail;
};

// Instance-level verification suite behind the `check` command: finite
// difference tests of the gradients and the (a, t) Hessian, the per-step
// improvement identities, rounding feasibility, and the rounded-violation
// bound after a greedy run.  Checks needing constraints are skipped on
// unconstrained instances.  Deterministic for fixed inputs.
std::vector<CheckResult> run_instance_checks(const ConstrainedOtProblem& p,
                                             double eta,
                                             const SolverConfig& greedy_cfg);

bool all_checks_pass(const std::vector<CheckResult>& results);

}  // namespace cot

#endif  // COT_CHECKS_HPP_
