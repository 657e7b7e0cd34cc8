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

#ifndef COT_SNS_HPP_
#define COT_SNS_HPP_

#include <Eigen/SparseCore>

#include "cot/lyapunov.hpp"
#include "cot/model.hpp"
#include "cot/sinkhorn.hpp"
#include "cot/types.hpp"

namespace cot {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Entry-wise truncation keeping at most nnz_budget entries of P: the
// adaptive threshold rho is the smallest value retaining <= nnz_budget
// entries; ties at rho are kept in (row, col) order until the budget fills.
SparseMatrix sparsify(const PlanMatrix& plan, int nnz_budget);

// Hessian of f over (x, y, a) with the plan block truncated; diag and cross
// blocks stay exact.  scale -eta is applied on multiply, and `regularized`
// adds the -vv^T term of f~ with v = (1_n, -1_n, 0_{K+L}).
struct SparseHessian {
  Vector diag_r;        // P 1
  Vector diag_c;        // P^T 1
  SparseMatrix p_sparse;
  Matrix b_xa;          // n x (K+L)
  Matrix b_ya;          // n x (K+L)
  Matrix a_block;       // (K+L) x (K+L)
  double eta = 1.0;
  bool regularized = false;

  int dim() const {
    return 2 * static_cast<int>(diag_r.size()) +
           static_cast<int>(a_block.rows());
  }
  Vector apply(const Vector& z) const;
};

SparseHessian build_sparse_hessian(const ConstrainedOtProblem& p,
                                   const PlanMatrix& plan, const Vector& a,
                                   double eta, int nnz_budget,
                                   bool regularized);

struct SnsConfig {
  int n1 = 20;              // Sinkhorn warm-start iterations
  int n2 = 30;              // sparse Newton iterations
  int nnz_budget = 0;       // retained entries of P; 0 means the default 5n
  double cg_tol = 1e-10;
  int cg_max_iter = 0;      // 0 means 10 * system dimension
  double tol_grad_l1 = 1e-12;
  int newton_inner_cap = 20;  // a_update cap inside the Sinkhorn stage
  double armijo_c = 1e-4;
  double backtrack_shrink = 0.5;
  double min_step = 1e-14;
  bool record_metrics = false;
};

struct CgResult {
  Vector dz;
  int iterations = 0;
  bool converged = false;
  bool fallback = false;  // breakdown; dz is the best ascent direction found
  double rel_residual = 0.0;
};

// Solves H dz = -g through the matrix-vector product only, stopping at
// ||H dz + g||_2 <= cg_tol ||g||_2 or cg_max_iter.  On a zero-curvature
// breakdown the current iterate (or g itself) is returned, flagged.
CgResult cg_solve(const SparseHessian& h, const Vector& g,
                  const SnsConfig& cfg);

// Algorithm: n1 iterations of the scaling solver, projection of the duals
// onto the complement of the degenerate direction v, then up to n2 sparse
// Newton steps on f~ (assemble SparseHessian, CG against the f~ gradient,
// Armijo backtracking).
SolveReport sns_solve(const ConstrainedOtProblem& p, const SnsConfig& cfg,
                      double eta, DualState init);

struct ScheduleConfig {
  SnsConfig base;          // nnz/cg/line-search settings for every stage
  int stage_n1 = 5;        // per-stage budgets while doubling
  int stage_n2 = 5;
  double final_tol = 1e-10;
  int final_newton_cap = 500;
};

// Doubling regularization schedule: stages at eta = 1, 2, 4, ... carry the
// dual state forward; the final stage runs at eta_target until
// ||grad||_1 <= final_tol.  Requires eta_target >= 1.
SolveReport scheduled_solve(const ConstrainedOtProblem& p, double eta_target,
                            const ScheduleConfig& schedule);

}  // namespace cot

#endif  // COT_SNS_HPP_
