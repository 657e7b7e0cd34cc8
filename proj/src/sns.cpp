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

#include "cot/sns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cot/transport.hpp"

namespace cot {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_config(const SnsConfig& cfg) {
  if (cfg.n1 < 0 || cfg.n2 < 0) throw InvalidInput("stage budgets negative");
  if (!(cfg.cg_tol > 0.0) || !(cfg.tol_grad_l1 > 0.0)) {
    throw InvalidInput("tolerances must be positive");
  }
  if (!(cfg.armijo_c > 0.0 && cfg.armijo_c < 1.0) ||
      !(cfg.backtrack_shrink > 0.0 && cfg.backtrack_shrink < 1.0) ||
      !(cfg.min_step > 0.0)) {
    throw InvalidInput("line search parameters out of range");
  }
}

Vector stack_gradient(const GradientVector& g) {
  Vector z(g.gx.size() + g.gy.size() + g.ga.size());
  z << g.gx, g.gy, g.ga;
  return z;
}

}  // namespace

SparseMatrix sparsify(const PlanMatrix& plan, int nnz_budget) {
  if (nnz_budget < 0) throw InvalidInput("sparsify: negative budget");
  const int n = plan.n();
  const Matrix& p = plan.entries;
  if (!p.allFinite()) throw InvalidInput("sparsify: non-finite plan");

  struct Entry {
    double value;
    int row, col;
  };
  std::vector<Entry> positive;
  positive.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (p(i, j) > 0.0) positive.push_back({p(i, j), i, j});
    }
  }

  std::vector<Eigen::Triplet<double>> kept;
  if (static_cast<int>(positive.size()) <= nnz_budget) {
    for (const Entry& e : positive) kept.emplace_back(e.row, e.col, e.value);
  } else {
    // rho = the budget-th largest value; keep everything above it, then fill
    // the remaining slots with ties in (row, col) order.
    std::vector<double> values(positive.size());
    for (std::size_t i = 0; i < positive.size(); ++i) {
      values[i] = positive[i].value;
    }
    std::nth_element(values.begin(), values.begin() + (nnz_budget - 1),
                     values.end(), std::greater<double>());
    const double rho = nnz_budget > 0 ? values[nnz_budget - 1] : kNan;
    int slots = nnz_budget;
    for (const Entry& e : positive) {
      if (e.value > rho) {
        kept.emplace_back(e.row, e.col, e.value);
        --slots;
      }
    }
    for (const Entry& e : positive) {  // (row, col) order by construction
      if (slots <= 0) break;
      if (e.value == rho) {
        kept.emplace_back(e.row, e.col, e.value);
        --slots;
      }
    }
  }

  SparseMatrix out(n, n);
  out.setFromTriplets(kept.begin(), kept.end());
  out.makeCompressed();
  return out;
}

Vector SparseHessian::apply(const Vector& z) const {
  const int n = static_cast<int>(diag_r.size());
  const int m = static_cast<int>(a_block.rows());
  const auto zx = z.segment(0, n);
  const auto zy = z.segment(n, n);
  const auto za = z.segment(2 * n, m);
  Vector out(2 * n + m);
  out.segment(0, n) = diag_r.cwiseProduct(zx) + p_sparse * zy;
  out.segment(n, n) = p_sparse.transpose() * zx + diag_c.cwiseProduct(zy);
  if (m > 0) {
    out.segment(0, n).noalias() += b_xa * za;
    out.segment(n, n).noalias() += b_ya * za;
    out.segment(2 * n, m) =
        b_xa.transpose() * zx + b_ya.transpose() * zy + a_block * za;
  }
  out *= -eta;
  if (regularized) {
    const double vz = zx.sum() - zy.sum();
    out.segment(0, n).array() -= vz;
    out.segment(n, n).array() += vz;
  }
  return out;
}

SparseHessian build_sparse_hessian(const ConstrainedOtProblem& p,
                                   const PlanMatrix& plan, const Vector& a,
                                   double eta, int nnz_budget,
                                   bool regularized) {
  const int m = p.num_constraints();
  SparseHessian h;
  h.eta = eta;
  h.regularized = regularized;
  h.diag_r = plan_row_sums(plan);
  h.diag_c = plan_col_sums(plan);
  h.p_sparse = sparsify(plan, nnz_budget);
  h.b_xa.resize(p.n, m);
  h.b_ya.resize(p.n, m);
  for (int i = 0; i < m; ++i) {
    const Matrix weighted =
        plan.entries.array() * p.constraints[i].matrix.array();
    h.b_xa.col(i) = weighted.rowwise().sum();
    h.b_ya.col(i) = weighted.colwise().sum().transpose();
  }
  const Matrix at = detail::at_hessian_from_plan(p, plan, a, eta);
  h.a_block = at.topLeftCorner(m, m) / -eta;
  return h;
}

CgResult cg_solve(const SparseHessian& h, const Vector& g,
                  const SnsConfig& cfg) {
  const int dim = h.dim();
  if (g.size() != dim) throw InvalidInput("cg_solve: dimension mismatch");
  const int max_iter = cfg.cg_max_iter > 0 ? cfg.cg_max_iter : 10 * dim;

  CgResult result;
  result.dz = Vector::Zero(dim);
  const double g_norm = g.norm();
  if (g_norm == 0.0) {
    result.converged = true;
    return result;
  }

  // CG on the positive-definite operator -H with right-hand side g, so the
  // returned dz solves H dz = -g.
  Vector residual = g;
  Vector direction = residual;
  double rs = residual.squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    const Vector a_dir = -h.apply(direction);
    const double curvature = direction.dot(a_dir);
    if (!(curvature > 0.0) || !std::isfinite(curvature)) {
      result.fallback = true;
      if (result.dz.isZero(0.0) || result.dz.dot(g) <= 0.0) result.dz = g;
      result.rel_residual = std::sqrt(rs) / g_norm;
      return result;
    }
    const double alpha = rs / curvature;
    result.dz += alpha * direction;
    residual -= alpha * a_dir;
    const double rs_next = residual.squaredNorm();
    ++result.iterations;
    if (std::sqrt(rs_next) <= cfg.cg_tol * g_norm) {
      result.converged = true;
      rs = rs_next;
      break;
    }
    direction = residual + (rs_next / rs) * direction;
    rs = rs_next;
  }
  result.rel_residual = std::sqrt(rs) / g_norm;
  return result;
}

SolveReport sns_solve(const ConstrainedOtProblem& p, const SnsConfig& cfg,
                      double eta, DualState init) {
  check_config(cfg);
  if (!(eta > 0.0)) throw InvalidInput("eta must be positive");
  const int m = p.num_constraints();
  const int nnz_budget = cfg.nnz_budget > 0 ? cfg.nnz_budget : 5 * p.n;

  SolveReport report;
  report.greedy_residual = kNan;
  init.eta = eta;

  // Sinkhorn stage.
  DualState state = std::move(init);
  if (cfg.n1 > 0) {
    SolverConfig warm;
    warm.eta = eta;
    warm.max_iter = cfg.n1;
    warm.tol_grad_l1 = cfg.tol_grad_l1;
    warm.newton_inner_cap = cfg.newton_inner_cap;
    warm.armijo_c = cfg.armijo_c;
    warm.backtrack_shrink = cfg.backtrack_shrink;
    warm.min_step = cfg.min_step;
    warm.record_metrics = cfg.record_metrics;
    SolveReport warm_report = sinkhorn_solve(p, warm, state);
    report.trace = std::move(warm_report.trace);
    report.dual_cap_hit = warm_report.dual_cap_hit;
    state = std::move(warm_report.final_state);
    if (warm_report.status == SolveStatus::kNumericalFailure) {
      report.status = SolveStatus::kNumericalFailure;
      report.message = std::move(warm_report.message);
      report.iterations = static_cast<int>(report.trace.size());
      report.final_state = std::move(state);
      report.final_grad_l1 =
          report.trace.empty() ? kNan : report.trace.back().grad_l1;
      return report;
    }
  }

  // Project into the non-degenerate direction of f.
  const double shift = (state.x.sum() - state.y.sum()) / (2.0 * p.n);
  state.x.array() -= shift;
  state.y.array() += shift;

  // Newton stage.
  bool converged = false;
  int iter = static_cast<int>(report.trace.size());
  for (int it = 0; it < cfg.n2; ++it) {
    PlanMatrix plan =
        detail::make_plan(p, state.x, state.y, state.a, state.eta);
    const double gap = state.x.sum() - state.y.sum();
    GradientVector gf = detail::grad_from_plan(p, plan, state.a, state.eta);
    gf.gx.array() -= gap;
    gf.gy.array() += gap;
    const Vector g_tilde = stack_gradient(gf);
    if (g_tilde.lpNorm<1>() <= cfg.tol_grad_l1) {
      converged = true;
      break;
    }

    const double f_cur =
        detail::f_from_plan(p, plan, state.x, state.y, state.a, state.eta) -
        0.5 * gap * gap;
    if (!std::isfinite(f_cur)) {
      report.status = SolveStatus::kNumericalFailure;
      report.message = "sns_solve: non-finite objective";
      break;
    }

    const SparseHessian h =
        build_sparse_hessian(p, plan, state.a, state.eta, nnz_budget, true);
    CgResult cg = cg_solve(h, g_tilde, cfg);
    Vector dz = std::move(cg.dz);
    double slope = g_tilde.dot(dz);
    if (!(slope > 0.0)) {
      dz = g_tilde;
      slope = g_tilde.squaredNorm();
    }

    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= cfg.min_step) {
      const double gain = detail::f_tilde_delta_step(
          p, plan, state.a, state.eta, gap, dz.segment(0, p.n),
          dz.segment(p.n, p.n), dz.segment(2 * p.n, m), alpha);
      if (gain >= cfg.armijo_c * alpha * slope) {
        state.x += alpha * dz.segment(0, p.n);
        state.y += alpha * dz.segment(p.n, p.n);
        state.a += alpha * dz.segment(2 * p.n, m);
        accepted = true;
        break;
      }
      alpha *= cfg.backtrack_shrink;
    }
    if (!accepted) {
      if (g_tilde.lpNorm<1>() <= 1e-8) {
        converged = true;
      } else {
        report.status = SolveStatus::kNumericalFailure;
        report.message = "sns_solve: Newton line search collapsed";
      }
      break;
    }

    plan = detail::make_plan(p, state.x, state.y, state.a, state.eta);
    ++iter;
    TraceRecord rec;
    rec.iter = iter;
    rec.f = detail::f_from_plan(p, plan, state.x, state.y, state.a, state.eta);
    rec.grad_l1 =
        detail::grad_from_plan(p, plan, state.a, state.eta).l1_norm();
    rec.kind = 'n';
    rec.qx = rec.qy = rec.qa = kNan;
    rec.cost = rec.violation = kNan;
    rec.eta = state.eta;
    rec.stage = 1;
    if (cfg.record_metrics) {
      const RoundedPlan rounded = round_to_feasible(plan.entries, p.r, p.c);
      rec.cost = transport_cost(rounded.plan, p.cost);
      rec.violation = violation(rounded.plan, p.constraints);
    }
    report.trace.push_back(rec);
    if (rec.grad_l1 <= cfg.tol_grad_l1) {
      converged = true;
      break;
    }
  }

  if (report.status != SolveStatus::kNumericalFailure) {
    report.status =
        converged ? SolveStatus::kConverged : SolveStatus::kMaxIterReached;
  }
  report.iterations = static_cast<int>(report.trace.size());
  report.final_state = state;
  report.final_grad_l1 =
      report.trace.empty() ? kNan : report.trace.back().grad_l1;
  return report;
}

SolveReport scheduled_solve(const ConstrainedOtProblem& p, double eta_target,
                            const ScheduleConfig& schedule) {
  if (!(eta_target >= 1.0)) {
    throw InvalidInput("scheduled_solve: eta_target must be >= 1");
  }
  check_config(schedule.base);
  if (schedule.stage_n1 < 0 || schedule.stage_n2 < 0 ||
      schedule.final_newton_cap < 1 || !(schedule.final_tol > 0.0)) {
    throw InvalidInput("scheduled_solve: bad schedule parameters");
  }

  const int n_eta =
      static_cast<int>(std::ceil(std::log2(std::max(eta_target, 1.0))));

  SolveReport report;
  report.greedy_residual = kNan;
  DualState state = zero_duals(p, 1.0);
  double eta = 1.0;

  auto absorb = [&report](SolveReport&& stage_report, int stage_index) {
    for (TraceRecord& rec : stage_report.trace) {
      rec.stage = stage_index;
      rec.iter = static_cast<int>(report.trace.size()) + 1;
      report.trace.push_back(rec);
    }
    StageRecord stage;
    stage.eta = stage_report.final_state.eta;
    stage.iterations = stage_report.iterations;
    stage.f_final = stage_report.trace.empty() ? kNan
                                               : stage_report.trace.back().f;
    stage.grad_l1_final = stage_report.final_grad_l1;
    report.stages.push_back(stage);
    report.dual_cap_hit = report.dual_cap_hit || stage_report.dual_cap_hit;
  };

  for (int i = 1; i <= n_eta; ++i) {
    SnsConfig stage_cfg = schedule.base;
    stage_cfg.n1 = schedule.stage_n1;
    stage_cfg.n2 = schedule.stage_n2;
    SolveReport stage_report = sns_solve(p, stage_cfg, eta, state);
    state = stage_report.final_state;
    const bool failed =
        stage_report.status == SolveStatus::kNumericalFailure;
    report.message = stage_report.message;
    absorb(std::move(stage_report), i - 1);
    if (failed) {
      report.status = SolveStatus::kNumericalFailure;
      report.iterations = static_cast<int>(report.trace.size());
      report.final_state = state;
      report.final_grad_l1 =
          report.trace.empty() ? kNan : report.trace.back().grad_l1;
      return report;
    }
    eta = std::min(2.0 * eta, eta_target);
  }

  // Final stage at eta_target, Newton until convergence.
  SnsConfig final_cfg = schedule.base;
  final_cfg.n2 = std::max(schedule.base.n2, schedule.final_newton_cap);
  final_cfg.tol_grad_l1 = schedule.final_tol;
  SolveReport final_report = sns_solve(p, final_cfg, eta, state);
  state = final_report.final_state;
  report.status = final_report.status;
  report.message = final_report.message;
  absorb(std::move(final_report), n_eta);

  report.iterations = static_cast<int>(report.trace.size());
  report.final_state = state;
  report.final_grad_l1 =
      report.trace.empty() ? kNan : report.trace.back().grad_l1;
  return report;
}

}  // namespace cot
