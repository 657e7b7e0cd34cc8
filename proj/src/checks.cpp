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

#include "cot/checks.hpp"

#include <cmath>
#include <functional>

#include "cot/lyapunov.hpp"
#include "cot/rng.hpp"
#include "cot/transport.hpp"

namespace cot {

namespace {

// Probe state: small deterministic perturbation around zero duals, so the
// finite-difference landscape is well scaled at any eta.
DualState probe_state(const ConstrainedOtProblem& p, double eta) {
  SplitMix64 rng(sub_seed(0x636F74ULL + static_cast<std::uint64_t>(p.n), 7));
  DualState s = zero_duals(p, eta);
  for (int i = 0; i < p.n; ++i) {
    s.x[i] = 0.2 * (rng.uniform01() - 0.5);
    s.y[i] = 0.2 * (rng.uniform01() - 0.5);
  }
  for (int m = 0; m < p.num_constraints(); ++m) {
    s.a[m] = 0.2 * (rng.uniform01() - 0.5);
  }
  return s;
}

double central_diff(const std::function<double(double)>& fn, double h) {
  return (fn(h) - fn(-h)) / (2.0 * h);
}

CheckResult gradient_fd_check(const ConstrainedOtProblem& p,
                              const DualState& s) {
  CheckResult result;
  result.name = "gradient_fd";
  result.bound = 1e-6;
  const double h = 1e-6;
  const GradientVector g = grad_f(p, s);
  double worst = 0.0;
  auto update = [&worst](double fd, double exact) {
    const double err = std::abs(fd - exact) / std::max(1.0, std::abs(exact));
    worst = std::max(worst, err);
  };
  for (int i = 0; i < p.n; ++i) {
    update(central_diff(
               [&](double d) {
                 DualState probe = s;
                 probe.x[i] += d;
                 return eval_f(p, probe);
               },
               h),
           g.gx[i]);
    update(central_diff(
               [&](double d) {
                 DualState probe = s;
                 probe.y[i] += d;
                 return eval_f(p, probe);
               },
               h),
           g.gy[i]);
  }
  for (int m = 0; m < p.num_constraints(); ++m) {
    update(central_diff(
               [&](double d) {
                 DualState probe = s;
                 probe.a[m] += d;
                 return eval_f(p, probe);
               },
               h),
           g.ga[m]);
  }
  result.measured = worst;
  result.status = worst <= result.bound ? CheckStatus::kPass
                                        : CheckStatus::kFail;
  return result;
}

CheckResult at_gradient_fd_check(const ConstrainedOtProblem& p,
                                 const DualState& s) {
  CheckResult result;
  result.name = "at_gradient_fd";
  result.bound = 1e-6;
  const double h = 1e-6;
  const Vector g = at_gradient(p, s);
  const int m = p.num_constraints();
  double worst = 0.0;
  auto f_at = [&](const Vector& a, double t) {
    DualState probe = s;
    probe.a = a;
    probe.x.array() += t;
    return eval_f(p, probe);
  };
  for (int i = 0; i < m; ++i) {
    Vector ap = s.a, am = s.a;
    ap[i] += h;
    am[i] -= h;
    const double fd = (f_at(ap, 0.0) - f_at(am, 0.0)) / (2.0 * h);
    worst = std::max(worst,
                     std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
  }
  const double fd_t = (f_at(s.a, h) - f_at(s.a, -h)) / (2.0 * h);
  worst = std::max(worst,
                   std::abs(fd_t - g[m]) / std::max(1.0, std::abs(g[m])));
  result.measured = worst;
  result.status = worst <= result.bound ? CheckStatus::kPass
                                        : CheckStatus::kFail;
  return result;
}

CheckResult at_hessian_fd_check(const ConstrainedOtProblem& p,
                                const DualState& s) {
  CheckResult result;
  result.name = "at_hessian_fd";
  const double h = 1e-4;
  const Matrix hess = at_hessian(p, s);
  const int dim = p.num_constraints() + 1;
  auto f_at = [&](const Vector& delta) {
    DualState probe = s;
    probe.a += delta.head(dim - 1);
    probe.x.array() += delta[dim - 1];
    return eval_f(p, probe);
  };
  double worst = 0.0;
  double worst_allowed = 0.0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      Vector dpp = Vector::Zero(dim), dpm = Vector::Zero(dim);
      Vector dmp = Vector::Zero(dim), dmm = Vector::Zero(dim);
      dpp[i] += h;
      dpp[j] += h;
      dpm[i] += h;
      dpm[j] -= h;
      dmp[i] -= h;
      dmp[j] += h;
      dmm[i] -= h;
      dmm[j] -= h;
      const double fd =
          (f_at(dpp) - f_at(dpm) - f_at(dmp) + f_at(dmm)) / (4.0 * h * h);
      const double err = std::abs(fd - hess(i, j));
      const double allowed = 1e-4 * (1.0 + std::abs(hess(i, j)));
      if (err - allowed > worst - worst_allowed) {
        worst = err;
        worst_allowed = allowed;
      }
    }
  }
  result.measured = worst;
  result.bound = worst_allowed;
  result.status = worst <= worst_allowed ? CheckStatus::kPass
                                         : CheckStatus::kFail;
  return result;
}

CheckResult theorem2_check(const ConstrainedOtProblem& p, const DualState& s,
                           bool x_step) {
  CheckResult result;
  result.name = x_step ? "scaling_step_identity_x" : "scaling_step_identity_y";
  result.bound = 1e-9;
  // Warm up with the opposite scaling so the plan has unit mass.  The
  // per-step improvement then equals the KL divergence scaled by 1/eta.
  const DualState warmed = x_step ? y_update(p, s) : x_update(p, s);
  const PlanMatrix plan = plan_from_duals(p, warmed);
  const double f0 = eval_f(p, warmed);
  double expected;
  DualState stepped = warmed;
  if (x_step) {
    expected = kl_div(p.r, plan_row_sums(plan)) / s.eta;
    stepped = x_update(p, warmed);
  } else {
    expected = kl_div(p.c, plan_col_sums(plan)) / s.eta;
    stepped = y_update(p, warmed);
  }
  const double delta = eval_f(p, stepped) - f0;
  result.measured = std::abs(delta - expected);
  result.status = result.measured <= result.bound ? CheckStatus::kPass
                                                  : CheckStatus::kFail;
  return result;
}

CheckResult a_step_bound_check(const ConstrainedOtProblem& p,
                               const DualState& s, const SolverConfig& cfg) {
  CheckResult result;
  result.name = "a_step_lower_bound";
  result.bound = -1e-10;
  if (p.num_constraints() == 0) {
    result.status = CheckStatus::kSkipped;
    result.detail = "no constraints";
    return result;
  }
  const DualState warmed = x_update(p, s);
  const QValues q = q_values(p, warmed);
  const double f0 = eval_f(p, warmed);
  SolverConfig inner = cfg;
  inner.newton_inner_cap = 50;
  const DualState stepped = a_update(p, warmed, inner);
  const double delta = eval_f(p, stepped) - f0;
  result.measured = delta - q.qa;
  result.status = result.measured >= result.bound ? CheckStatus::kPass
                                                  : CheckStatus::kFail;
  return result;
}

CheckResult rounding_check(const ConstrainedOtProblem& p,
                           const DualState& s) {
  CheckResult result;
  result.name = "rounding_feasibility";
  result.bound = 1e-12;
  const PlanMatrix plan = plan_from_duals(p, s);
  const RoundedPlan rounded = round_to_feasible(plan.entries, p.r, p.c);
  const double marginal_err =
      (rounded.plan.rowwise().sum() - p.r).lpNorm<Eigen::Infinity>() +
      (rounded.plan.colwise().sum().transpose() - p.c)
          .lpNorm<Eigen::Infinity>();
  result.measured = marginal_err;
  result.status = marginal_err <= result.bound ? CheckStatus::kPass
                                               : CheckStatus::kFail;
  return result;
}

CheckResult prop1_check(const ConstrainedOtProblem& p, double eta,
                        const SolverConfig& greedy_cfg) {
  CheckResult result;
  result.name = "rounded_violation_bound";
  if (p.num_constraints() == 0) {
    result.status = CheckStatus::kSkipped;
    result.detail = "no constraints";
    return result;
  }
  SolverConfig cfg = greedy_cfg;
  cfg.eta = eta;
  const SolveReport report = greedy_solve(p, cfg, zero_duals(p, eta));
  if (report.status != SolveStatus::kConverged) {
    result.status = CheckStatus::kFail;
    result.detail = "greedy solve did not converge: " +
                    std::to_string(report.final_grad_l1);
    return result;
  }
  const double eps = report.final_grad_l1;
  double c_d = 0.0;
  for (const Constraint& d : p.constraints) {
    c_d = std::max(c_d, d.matrix.cwiseAbs().maxCoeff());
  }
  const PlanMatrix plan = plan_from_duals(p, report.final_state);
  const RoundedPlan rounded = round_to_feasible(plan.entries, p.r, p.c);
  result.measured = violation(rounded.plan, p.constraints);
  result.bound = eps * (1.0 + 2.0 * p.num_constraints() * c_d);
  result.status = result.measured <= result.bound ? CheckStatus::kPass
                                                  : CheckStatus::kFail;
  return result;
}

}  // namespace

std::vector<CheckResult> run_instance_checks(const ConstrainedOtProblem& p,
                                             double eta,
                                             const SolverConfig& greedy_cfg) {
  const DualState probe = probe_state(p, eta);
  std::vector<CheckResult> results;
  results.push_back(gradient_fd_check(p, probe));
  results.push_back(at_gradient_fd_check(p, probe));
  results.push_back(at_hessian_fd_check(p, probe));
  results.push_back(theorem2_check(p, probe, true));
  results.push_back(theorem2_check(p, probe, false));
  results.push_back(a_step_bound_check(p, probe, greedy_cfg));
  results.push_back(rounding_check(p, probe));
  results.push_back(prop1_check(p, eta, greedy_cfg));
  return results;
}

bool all_checks_pass(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results) {
    if (r.status == CheckStatus::kFail) return false;
  }
  return true;
}

}  // namespace cot
