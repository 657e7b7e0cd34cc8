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

#include "cot/report_io.hpp"

#include <cstdio>

#include "cot/lyapunov.hpp"
#include "json.hpp"

namespace cot {

namespace {

std::string fmt(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

std::string status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterReached:
      return "max_iter";
    case SolveStatus::kNumericalFailure:
      return "numerical_failure";
  }
  return "unknown";
}

void write_trace_csv(std::ostream& out, const SolveReport& report) {
  out << "iter,f,grad_l1,cost,violation\n";
  for (const TraceRecord& rec : report.trace) {
    out << rec.iter << ',' << fmt(rec.f) << ',' << fmt(rec.grad_l1) << ','
        << fmt(rec.cost) << ',' << fmt(rec.violation) << '\n';
  }
}

void write_pareto_csv(std::ostream& out,
                      const std::vector<ParetoPoint>& points) {
  out << "t,eta,manhattan_cost,euclidean_cost,converged\n";
  for (const ParetoPoint& point : points) {
    out << fmt(point.t) << ',' << fmt(point.eta) << ','
        << fmt(point.manhattan_cost) << ',' << fmt(point.euclidean_cost)
        << ',' << (point.converged ? 1 : 0) << '\n';
  }
}

std::string result_json(const ConstrainedOtProblem& p,
                        const SolveReport& report, double cost,
                        double violation_value, bool emit_plan) {
  nlohmann::json doc;
  doc["status"] = status_name(report.status);
  doc["iterations"] = report.iterations;
  doc["f_final"] =
      report.trace.empty() ? nlohmann::json() : nlohmann::json(
                                                    report.trace.back().f);
  doc["grad_l1_final"] = report.final_grad_l1;
  doc["cost"] = cost;
  doc["violation"] = violation_value;
  if (!report.message.empty()) doc["message"] = report.message;
  if (report.dual_cap_hit) doc["dual_cap_hit"] = true;
  if (emit_plan) {
    const PlanMatrix plan = plan_from_duals(p, report.final_state);
    nlohmann::json flat = nlohmann::json::array();
    for (int i = 0; i < p.n; ++i) {
      for (int j = 0; j < p.n; ++j) flat.push_back(plan.entries(i, j));
    }
    doc["plan"] = std::move(flat);
  }
  return doc.dump(2);
}

}  // namespace cot
