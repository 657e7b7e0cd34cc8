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

#ifndef COT_LYAPUNOV_HPP_
#define COT_LYAPUNOV_HPP_

#include <utility>

#include "cot/model.hpp"
#include "cot/types.hpp"

namespace cot {

// The concave dual objective maximized by every solver in this library:
//
//   f(x, y, a) = -(1/eta) sum_ij exp(eta(-C_ij + sum_m a_m (D_m)_ij
//                                     + x_i + y_j) - 1)
//                + x.r + y.c - (1/eta) sum_{k<=K} exp(-eta a_k - 1)
//
// The matrix inside the first exponential is the intermediate transport plan
// P determined by the duals; its row/column sums match (r, c) exactly at the
// maximizer.

// Intermediate plan in both linear and log form.  log_entries is the stable
// representation; entries == exp(log_entries) element-wise.
struct PlanMatrix {
  Matrix entries;
  Matrix log_entries;
  double max_log = 0.0;  // cached max of log_entries

  int n() const { return static_cast<int>(entries.rows()); }
};

struct GradientVector {
  Vector gx;  // r - P 1
  Vector gy;  // c - P^T 1
  Vector ga;  // stationarity residuals d_m per constraint
  double l1_norm() const;
};

// Builds the plan for the given duals.  Throws NumericalOverflow when any
// entry exceeds the double range.
PlanMatrix plan_from_duals(const ConstrainedOtProblem& p, const DualState& s);

double eval_f(const ConstrainedOtProblem& p, const DualState& s);
GradientVector grad_f(const ConstrainedOtProblem& p, const DualState& s);

// Analytic maximization of f over a uniform shift of x.  Returns
// {f(x + t*1, y, a), t*} with t* computed through a max-shifted log-sum-exp;
// the plan at the shifted state has unit total mass.
std::pair<double, double> eval_f_aug(const ConstrainedOtProblem& p,
                                     const Vector& x, const Vector& y,
                                     const Vector& a, double eta);

// Gradient of f over (a_1..a_{K+L}, t): the first K+L components are the ga
// block of grad_f, the last is 1 - sum_ij P_ij.
Vector at_gradient(const ConstrainedOtProblem& p, const DualState& s);

// Symmetric negative-semidefinite (K+L+1)^2 Hessian over (a, t):
//   H[m][m'] = -eta sum_ij P_ij (D_m)_ij (D_m')_ij   (- eta exp(-eta a_k - 1)
//              on the diagonal for inequality indices)
//   H[m][t]  = -eta sum_ij P_ij (D_m)_ij
//   H[t][t]  = -eta sum_ij P_ij
Matrix at_hessian(const ConstrainedOtProblem& p, const DualState& s);

// Hessian of f over (x, y, a), kept in block form so that products cost
// O(n^2 + n(K+L)):
//   -eta [[diag(P1), P,          B_xa],
//         [P^T,      diag(P^T1), B_ya],
//         [B_xa^T,   B_ya^T,     A   ]]
// with (B_xa)_{i,m} = sum_j P_ij (D_m)_ij, (B_ya)_{j,m} = sum_i P_ij (D_m)_ij
// and A the a-block of at_hessian (scale factored out).
struct FullHessian {
  Vector row_mass;  // P 1
  Vector col_mass;  // P^T 1
  Matrix plan;      // P
  Matrix b_xa;      // n x (K+L)
  Matrix b_ya;      // n x (K+L)
  Matrix a_block;   // (K+L) x (K+L), includes the slack diagonal
  double eta = 1.0;

  int dim() const {
    return 2 * static_cast<int>(row_mass.size()) +
           static_cast<int>(a_block.rows());
  }
  Vector apply(const Vector& z) const;
  Matrix dense() const;
};

FullHessian full_hessian(const ConstrainedOtProblem& p, const DualState& s);

// f with the translation degeneracy along (1, -1, 0) removed:
//   f~(x, y, a) = f(x, y, a) - (1/2)(sum x - sum y)^2.
double eval_f_tilde(const ConstrainedOtProblem& p, const DualState& s);
GradientVector grad_f_tilde(const ConstrainedOtProblem& p, const DualState& s);

// Stable reductions over a plan.  The linear-domain results switch to
// max-shifted exponentiation once any log entry exceeds 700, so intermediate
// sums cannot overflow before the result itself does.
Vector plan_row_sums(const PlanMatrix& plan);
Vector plan_col_sums(const PlanMatrix& plan);
double plan_total_mass(const PlanMatrix& plan);
double plan_inner(const PlanMatrix& plan, const Matrix& d);
Vector plan_log_row_sums(const PlanMatrix& plan);
Vector plan_log_col_sums(const PlanMatrix& plan);
double plan_log_total_mass(const PlanMatrix& plan);

namespace detail {

// Plan construction without the overflow check; entries may be +inf.
PlanMatrix make_plan(const ConstrainedOtProblem& p, const Vector& x,
                     const Vector& y, const Vector& a, double eta);

// Overflow-tolerant evaluations used by line searches: return -inf instead
// of throwing when the plan mass leaves the double range.
double f_value(const ConstrainedOtProblem& p, const Vector& x,
               const Vector& y, const Vector& a, double eta);
double f_tilde_value(const ConstrainedOtProblem& p, const Vector& x,
                     const Vector& y, const Vector& a, double eta);

// Evaluations reusing an already-built plan for the same state.
double f_from_plan(const ConstrainedOtProblem& p, const PlanMatrix& plan,
                   const Vector& x, const Vector& y, const Vector& a,
                   double eta);
GradientVector grad_from_plan(const ConstrainedOtProblem& p,
                              const PlanMatrix& plan, const Vector& a,
                              double eta);
Matrix at_hessian_from_plan(const ConstrainedOtProblem& p,
                            const PlanMatrix& plan, const Vector& a,
                            double eta);

// sum_{k<=K} exp(-eta a_k - 1); +inf when a component overflows.
double slack_sum(const ConstrainedOtProblem& p, const Vector& a, double eta);

// Objective differences f(s + alpha*step) - f(s) evaluated through expm1 on
// the log-entry increments, so line searches keep full precision when the
// true change is far below the rounding granularity of f itself.  `plan`
// and `a` must belong to the current state; `gap` is sum(x) - sum(y).
// Returns -inf when the stepped state overflows.
double f_delta_at_step(const ConstrainedOtProblem& p, const PlanMatrix& plan,
                       const Vector& a, double eta, double t_step,
                       const Vector& da, double alpha);
double f_tilde_delta_step(const ConstrainedOtProblem& p,
                          const PlanMatrix& plan, const Vector& a, double eta,
                          double gap, const Vector& dx, const Vector& dy,
                          const Vector& da, double alpha);

}  // namespace detail

}  // namespace cot

#endif  // COT_LYAPUNOV_HPP_
