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

#include "cot/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "cot/transport.hpp"

namespace cot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kInnerGradTol = 1e-12;

// Per-a_update trust region on inequality duals: each a_k may move at most
// 1e3/eta away from its entry value, which is where exp(-eta a_k - 1)
// underflows anyway.  Stops runaway duals on boundary-feasible instances.
constexpr double kIneqDualRange = 1e3;

void check_config(const SolverConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw InvalidInput("SolverConfig.eta must be set > 0");
  if (cfg.max_iter < 1 || cfg.newton_inner_cap < 1) {
    throw InvalidInput("iteration caps must be positive");
  }
  if (!(cfg.armijo_c > 0.0 && cfg.armijo_c < 1.0) ||
      !(cfg.backtrack_shrink > 0.0 && cfg.backtrack_shrink < 1.0) ||
      !(cfg.min_step > 0.0) || !(cfg.tol_grad_l1 > 0.0)) {
    throw InvalidInput("line search parameters out of range");
  }
}

struct AUpdateResult {
  DualState state;
  bool capped = false;
};

AUpdateResult a_update_impl(const ConstrainedOtProblem& p, const DualState& s,
                            const SolverConfig& cfg) {
  const double eta = s.eta;
  const int m = p.num_constraints();
  Vector a = s.a;
  const Vector a_entry = a;
  bool capped = false;

  // Exact t-recentering; the plan at (x + t_acc, y, a) has unit mass.
  PlanMatrix plan = detail::make_plan(p, s.x, s.y, a, eta);
  double t_acc = -plan_log_total_mass(plan) / eta;

  for (int inner = 0; inner < cfg.newton_inner_cap; ++inner) {
    const Vector x_shift = s.x.array() + t_acc;
    plan = detail::make_plan(p, x_shift, s.y, a, eta);
    const double f_cur = detail::f_from_plan(p, plan, x_shift, s.y, a, eta);
    if (!std::isfinite(f_cur)) {
      throw NumericalFailure("a_update: non-finite objective");
    }

    const GradientVector gf = detail::grad_from_plan(p, plan, a, eta);
    Vector g(m + 1);
    g.head(m) = gf.ga;
    g[m] = 1.0 - plan_total_mass(plan);
    if (g.lpNorm<Eigen::Infinity>() <= kInnerGradTol) break;

    const Matrix h = detail::at_hessian_from_plan(p, plan, a, eta);
    const double h_scale = h.cwiseAbs().maxCoeff();
    double lambda = 1e-10 * (1.0 + h_scale);
    const double lambda_max = 1e-2 * (1.0 + h_scale);

    bool accepted = false;
    bool pinned = false;
    while (!accepted) {
      // (H - lambda I) delta = -g, solved as the SPD system
      // (-H + lambda I) delta = g.
      Matrix shifted = -h;
      shifted.diagonal().array() += lambda;
      Eigen::LLT<Matrix> llt(shifted);
      if (llt.info() == Eigen::Success) {
        Vector delta = llt.solve(g);

        // Trust region on inequality duals: zero components pinned at the
        // boundary, shorten the step otherwise.
        double alpha = 1.0;
        for (int k = 0; k < p.k_ineq; ++k) {
          if (delta[k] == 0.0) continue;
          const double room = delta[k] > 0.0
                                  ? a_entry[k] + kIneqDualRange / eta - a[k]
                                  : a[k] - (a_entry[k] - kIneqDualRange / eta);
          if (room <= 0.0) {
            delta[k] = 0.0;
            capped = true;
          } else {
            const double step_cap = room / std::abs(delta[k]);
            if (step_cap < alpha) {
              alpha = step_cap;
              capped = true;
            }
          }
        }
        const double slope = g.dot(delta);
        if (!(slope > 0.0)) {
          // All ascent blocked by the cap.
          pinned = true;
          break;
        }

        while (alpha >= cfg.min_step) {
          // Difference-based Armijo: exact near the maximizer where two
          // full objective values would agree to rounding.
          const double gain = detail::f_delta_at_step(
              p, plan, a, eta, delta[m], delta.head(m), alpha);
          if (gain >= cfg.armijo_c * alpha * slope) {
            a += alpha * delta.head(m);
            t_acc += alpha * delta[m];
            accepted = true;
            break;
          }
          alpha *= cfg.backtrack_shrink;
        }
      }
      if (!accepted) {
        lambda *= 2.0;
        if (lambda > lambda_max) {
          // At the numerical floor a failed search is convergence, not error.
          if (g.lpNorm<Eigen::Infinity>() <= 1e-8) break;
          throw NumericalFailure("a_update: line search collapsed");
        }
      }
    }
    if (!accepted || pinned) break;
  }

  // Final exact recentering: unit plan mass regardless of inner progress.
  plan = detail::make_plan(p, Vector(s.x.array() + t_acc), s.y, a, eta);
  t_acc += -plan_log_total_mass(plan) / eta;

  AUpdateResult result;
  result.state = DualState{Vector(s.x.array() + t_acc), s.y, a, eta};
  result.capped = capped;
  return result;
}

QValues q_values_from_plan(const ConstrainedOtProblem& p,
                           const PlanMatrix& plan, const Vector& a,
                           double eta) {
  QValues q;
  const Vector lrs = plan_log_row_sums(plan);
  const Vector lcs = plan_log_col_sums(plan);
  q.qx = 0.0;
  q.qy = 0.0;
  for (int i = 0; i < p.n; ++i) {
    if (p.r[i] > 0.0) {
      q.qx += std::isfinite(lrs[i]) ? p.r[i] * (std::log(p.r[i]) - lrs[i])
                                    : kInf;
    }
    if (p.c[i] > 0.0) {
      q.qy += std::isfinite(lcs[i]) ? p.c[i] * (std::log(p.c[i]) - lcs[i])
                                    : kInf;
    }
  }
  // KL is nonnegative once the plan carries unit mass; clamp the rounding
  // noise so the Q ordering is stable.
  q.qx = std::max(q.qx, 0.0);
  q.qy = std::max(q.qy, 0.0);

  const int m = p.num_constraints();
  q.d = detail::grad_from_plan(p, plan, a, eta).ga;
  q.c_d = 0.0;
  for (const Constraint& d : p.constraints) {
    q.c_d = std::max(q.c_d, d.matrix.cwiseAbs().maxCoeff());
  }
  q.qa = 0.0;
  if (m > 0 && q.c_d > 0.0) {
    const double ineq_denom = 8.0 * eta * q.c_d + 4.0 * eta * m * q.c_d * q.c_d;
    const double eq_denom = 2.0 * eta * m * q.c_d * q.c_d;
    for (int k = 0; k < p.k_ineq; ++k) {
      const double dk = std::abs(q.d[k]);
      q.qa += dk * std::min(1.0 / (8.0 * eta), dk / ineq_denom);
    }
    for (int l = p.k_ineq; l < m; ++l) {
      q.qa += q.d[l] * q.d[l] / eq_denom;
    }
  }
  return q;
}

TraceRecord make_record(const ConstrainedOtProblem& p, const PlanMatrix& plan,
                        const DualState& s, int iter, char kind,
                        bool record_metrics) {
  TraceRecord rec;
  rec.iter = iter;
  rec.f = detail::f_from_plan(p, plan, s.x, s.y, s.a, s.eta);
  rec.grad_l1 = detail::grad_from_plan(p, plan, s.a, s.eta).l1_norm();
  rec.kind = kind;
  rec.qx = rec.qy = rec.qa = kNan;
  rec.eta = s.eta;
  if (record_metrics) {
    const RoundedPlan rounded = round_to_feasible(plan.entries, p.r, p.c);
    rec.cost = transport_cost(rounded.plan, p.cost);
    rec.violation = violation(rounded.plan, p.constraints);
  } else {
    rec.cost = rec.violation = kNan;
  }
  return rec;
}

}  // namespace

DualState x_update(const ConstrainedOtProblem& p, const DualState& s) {
  const PlanMatrix plan = detail::make_plan(p, s.x, s.y, s.a, s.eta);
  const Vector lrs = plan_log_row_sums(plan);
  if (!lrs.allFinite()) {
    throw NumericalFailure("x_update: degenerate row sums");
  }
  DualState out = s;
  for (int i = 0; i < p.n; ++i) {
    if (p.r[i] > 0.0) out.x[i] += (std::log(p.r[i]) - lrs[i]) / s.eta;
  }
  return out;
}

DualState y_update(const ConstrainedOtProblem& p, const DualState& s) {
  const PlanMatrix plan = detail::make_plan(p, s.x, s.y, s.a, s.eta);
  const Vector lcs = plan_log_col_sums(plan);
  if (!lcs.allFinite()) {
    throw NumericalFailure("y_update: degenerate column sums");
  }
  DualState out = s;
  for (int j = 0; j < p.n; ++j) {
    if (p.c[j] > 0.0) out.y[j] += (std::log(p.c[j]) - lcs[j]) / s.eta;
  }
  return out;
}

DualState a_update(const ConstrainedOtProblem& p, const DualState& s,
                   const SolverConfig& cfg) {
  return a_update_impl(p, s, cfg).state;
}

QValues q_values(const ConstrainedOtProblem& p, const DualState& s) {
  const PlanMatrix plan = plan_from_duals(p, s);
  return q_values_from_plan(p, plan, s.a, s.eta);
}

double feasibility_residual(const ConstrainedOtProblem& p,
                            const PlanMatrix& plan) {
  double total = (plan_row_sums(plan) - p.r).lpNorm<1>() +
                 (plan_col_sums(plan) - p.c).lpNorm<1>();
  for (int m = 0; m < p.num_constraints(); ++m) {
    const double coupling = plan_inner(plan, p.constraints[m].matrix);
    if (m < p.k_ineq) {
      total += std::abs(std::min(coupling, 0.0));
    } else {
      total += std::abs(coupling);
    }
  }
  return total;
}

SolveReport sinkhorn_solve(const ConstrainedOtProblem& p,
                           const SolverConfig& cfg, const DualState& init) {
  check_config(cfg);
  if (init.eta != cfg.eta) {
    throw InvalidInput("init.eta must match SolverConfig.eta");
  }

  SolveReport report;
  report.greedy_residual = kNan;
  DualState state = init;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    bool capped = false;
    try {
      state = x_update(p, state);
      state = y_update(p, state);
      AUpdateResult au = a_update_impl(p, state, cfg);
      state = std::move(au.state);
      capped = au.capped;
    } catch (const NumericalFailure& e) {
      report.status = SolveStatus::kNumericalFailure;
      report.message = e.what();
      break;
    }
    const PlanMatrix plan = detail::make_plan(p, state.x, state.y, state.a,
                                              state.eta);
    TraceRecord rec = make_record(p, plan, state, iter, '*',
                                  cfg.record_metrics);
    rec.a_capped = capped;
    report.dual_cap_hit = report.dual_cap_hit || capped;
    report.trace.push_back(rec);
    if (rec.grad_l1 <= cfg.tol_grad_l1) {
      report.status = SolveStatus::kConverged;
      break;
    }
  }

  report.iterations = static_cast<int>(report.trace.size());
  report.final_state = state;
  report.final_grad_l1 =
      report.trace.empty() ? kNan : report.trace.back().grad_l1;
  return report;
}

SolveReport greedy_solve(const ConstrainedOtProblem& p,
                         const SolverConfig& cfg, const DualState& init) {
  check_config(cfg);
  if (init.eta != cfg.eta) {
    throw InvalidInput("init.eta must match SolverConfig.eta");
  }

  SolveReport report;
  report.greedy_residual = kNan;
  DualState state = init;

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    char kind = 'x';
    QValues q;
    bool capped = false;
    try {
      const PlanMatrix plan =
          detail::make_plan(p, state.x, state.y, state.a, state.eta);
      q = q_values_from_plan(p, plan, state.a, state.eta);
      if (q.qx >= q.qy && q.qx >= q.qa) {
        kind = 'x';
        state = x_update(p, state);
      } else if (q.qy >= q.qa) {
        kind = 'y';
        state = y_update(p, state);
      } else {
        kind = 'a';
        AUpdateResult au = a_update_impl(p, state, cfg);
        state = std::move(au.state);
        capped = au.capped;
      }
    } catch (const NumericalFailure& e) {
      report.status = SolveStatus::kNumericalFailure;
      report.message = e.what();
      break;
    }
    const PlanMatrix plan = detail::make_plan(p, state.x, state.y, state.a,
                                              state.eta);
    TraceRecord rec = make_record(p, plan, state, iter, kind,
                                  cfg.record_metrics);
    rec.qx = q.qx;
    rec.qy = q.qy;
    rec.qa = q.qa;
    rec.a_capped = capped;
    report.dual_cap_hit = report.dual_cap_hit || capped;
    report.trace.push_back(rec);
    if (rec.grad_l1 <= cfg.tol_grad_l1) {
      report.status = SolveStatus::kConverged;
      report.greedy_residual = feasibility_residual(p, plan);
      break;
    }
  }

  report.iterations = static_cast<int>(report.trace.size());
  if (report.status != SolveStatus::kConverged &&
      report.status != SolveStatus::kNumericalFailure) {
    const PlanMatrix plan = detail::make_plan(p, state.x, state.y, state.a,
                                              state.eta);
    report.greedy_residual = feasibility_residual(p, plan);
  }
  report.final_state = state;
  report.final_grad_l1 =
      report.trace.empty() ? kNan : report.trace.back().grad_l1;
  return report;
}

}  // namespace cot
