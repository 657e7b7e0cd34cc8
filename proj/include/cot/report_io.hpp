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

#ifndef COT_REPORT_IO_HPP_
#define COT_REPORT_IO_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "cot/experiments.hpp"
#include "cot/sinkhorn.hpp"

namespace cot {

std::string status_name(SolveStatus status);

// Trace CSV: header "iter,f,grad_l1,cost,violation", one row per iteration,
// doubles printed with %.17g so reruns are byte-identical.
void write_trace_csv(std::ostream& out, const SolveReport& report);

// Sweep CSV: header "t,eta,manhattan_cost,euclidean_cost,converged".
void write_pareto_csv(std::ostream& out,
                      const std::vector<ParetoPoint>& points);

// Result JSON for the solve command: status, iterations, f_final,
// grad_l1_final, cost, violation and optionally the row-major plan.
std::string result_json(const ConstrainedOtProblem& p,
                        const SolveReport& report, double cost,
                        double violation_value, bool emit_plan);

}  // namespace cot

#endif  // COT_REPORT_IO_HPP_
