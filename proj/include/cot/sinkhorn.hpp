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

#ifndef COT_SINKHORN_HPP_
#define COT_SINKHORN_HPP_

#include <string>
#include <vector>

#include "cot/lyapunov.hpp"
#include "cot/model.hpp"
#include "cot/types.hpp"

namespace cot {

struct SolverConfig {
  double eta = 0.0;            // must be set explicitly
  int max_iter = 10000;
  double tol_grad_l1 = 1e-6;   // stop when ||grad f||_1 <= tol
  int newton_inner_cap = 20;   // damped Newton steps inside a_update
  double armijo_c = 1e-4;
  double backtrack_shrink = 0.5;
  double min_step = 1e-14;
  bool record_metrics = false;  // rounded cost/violation in the trace
};

// Guaranteed per-step improvements of f (Q_x, Q_y by KL divergence, Q_a by
// the residual-based lower bound) together with the residuals d_m they are
// built from and c_d = max_m ||D_m||_inf.
struct QValues {
  double qx = 0.0;
  double qy = 0.0;
  double qa = 0.0;
  Vector d;
  double c_d = 0.0;
};

enum class SolveStatus { kConverged, kMaxIterReached, kNumericalFailure };

struct TraceRecord {
  int iter = 0;
  double f = 0.0;
  double grad_l1 = 0.0;
  char kind = '*';    // 'x', 'y', 'a' for greedy steps, '*' sweep, 'n' Newton
  double qx = 0.0, qy = 0.0, qa = 0.0;  // greedy selection values (else NaN)
  double cost = 0.0, violation = 0.0;   // rounded metrics (NaN unless recorded)
  double eta = 0.0;
  int stage = 0;       // 0 scaling stage, 1 Newton stage; schedule index added
  bool a_capped = false;
};

struct StageRecord {
  double eta = 0.0;
  int iterations = 0;
  double f_final = 0.0;
  double grad_l1_final = 0.0;
};

struct SolveReport {
  int iterations = 0;
  std::vector<TraceRecord> trace;
  SolveStatus status = SolveStatus::kMaxIterReached;
  DualState final_state;
  double final_grad_l1 = 0.0;
  // Four-term feasibility residual of the intermediate plan at termination;
  // filled by greedy_solve, NaN otherwise.
  double greedy_residual = 0.0;
  bool dual_cap_hit = false;
  std::vector<StageRecord> stages;  // filled by scheduled_solve
  std::string message;
};

// Exact coordinate maximizers of f: row scaling x += (log r - log P1)/eta and
// the column mirror.  Rows/columns with zero marginal are left unchanged.
DualState x_update(const ConstrainedOtProblem& p, const DualState& s);
DualState y_update(const ConstrainedOtProblem& p, const DualState& s);

// Joint maximization over the constraint duals a and the uniform x-shift t:
// damped Newton with a Levenberg shift and Armijo backtracking, then an exact
// log-sum-exp recentering so the returned plan has unit mass.  Throws
// NumericalFailure when the line search collapses away from stationarity.
DualState a_update(const ConstrainedOtProblem& p, const DualState& s,
                   const SolverConfig& cfg);

QValues q_values(const ConstrainedOtProblem& p, const DualState& s);

// ||P1 - r||_1 + ||P^T1 - c||_1 + sum_k |min(D_k.P, 0)| + sum_l |D_{l+K}.P|.
double feasibility_residual(const ConstrainedOtProblem& p,
                            const PlanMatrix& plan);

// Alternating x/y scaling plus the (a, t) Newton update, repeated until
// ||grad f||_1 <= tol or max_iter.
SolveReport sinkhorn_solve(const ConstrainedOtProblem& p,
                           const SolverConfig& cfg, const DualState& init);

// One update per iteration, chosen by the largest of (Q_x, Q_y, Q_a); ties
// break in the order x, y, a.
SolveReport greedy_solve(const ConstrainedOtProblem& p,
                         const SolverConfig& cfg, const DualState& init);

}  // namespace cot

#endif  // COT_SINKHORN_HPP_
