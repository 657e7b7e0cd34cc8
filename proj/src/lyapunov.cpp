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

#include "cot/lyapunov.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Above this, direct element-wise exponentials risk overflowing in sums.
constexpr double kShiftThreshold = 700.0;

void check_state(const ConstrainedOtProblem& p, const DualState& s) {
  if (s.x.size() != p.n || s.y.size() != p.n ||
      s.a.size() != p.num_constraints()) {
    throw InvalidInput("dual state dimensions do not match the problem");
  }
  if (!(s.eta > 0.0)) throw InvalidInput("eta must be positive");
  if (!s.x.allFinite() || !s.y.allFinite() || !s.a.allFinite()) {
    throw InvalidInput("dual state has non-finite entries");
  }
}

}  // namespace

namespace detail {

PlanMatrix make_plan(const ConstrainedOtProblem& p, const Vector& x,
                     const Vector& y, const Vector& a, double eta) {
  PlanMatrix plan;
  plan.log_entries = -p.cost;
  for (int m = 0; m < p.num_constraints(); ++m) {
    plan.log_entries.noalias() += a[m] * p.constraints[m].matrix;
  }
  plan.log_entries.rowwise() += y.transpose();
  plan.log_entries.colwise() += x;
  plan.log_entries *= eta;
  plan.log_entries.array() -= 1.0;
  plan.max_log = plan.log_entries.maxCoeff();
  plan.entries = plan.log_entries.array().exp();
  return plan;
}

double slack_sum(const ConstrainedOtProblem& p, const Vector& a, double eta) {
  double total = 0.0;
  for (int k = 0; k < p.k_ineq; ++k) {
    total += std::exp(-eta * a[k] - 1.0);
  }
  return total;
}

double f_from_plan(const ConstrainedOtProblem& p, const PlanMatrix& plan,
                   const Vector& x, const Vector& y, const Vector& a,
                   double eta) {
  const double mass = plan_total_mass(plan);
  const double slack = slack_sum(p, a, eta);
  if (!std::isfinite(mass) || !std::isfinite(slack)) return -kInf;
  return -mass / eta + x.dot(p.r) + y.dot(p.c) - slack / eta;
}

double f_value(const ConstrainedOtProblem& p, const Vector& x,
               const Vector& y, const Vector& a, double eta) {
  const PlanMatrix plan = make_plan(p, x, y, a, eta);
  return f_from_plan(p, plan, x, y, a, eta);
}

double f_tilde_value(const ConstrainedOtProblem& p, const Vector& x,
                     const Vector& y, const Vector& a, double eta) {
  const double base = f_value(p, x, y, a, eta);
  const double gap = x.sum() - y.sum();
  return base - 0.5 * gap * gap;
}

namespace {

// sum_ij P_ij (exp(dl_ij) - 1) and the slack counterpart for a step in the
// constraint duals.
double mass_delta(const PlanMatrix& plan, const Matrix& dl) {
  return (plan.entries.array() * dl.array().unaryExpr([](double v) {
    return std::expm1(v);
  })).sum();
}

double slack_delta(const ConstrainedOtProblem& p, const Vector& a, double eta,
                   const Vector& da, double alpha) {
  double total = 0.0;
  for (int k = 0; k < p.k_ineq; ++k) {
    total += std::exp(-eta * a[k] - 1.0) * std::expm1(-eta * alpha * da[k]);
  }
  return total;
}

}  // namespace

double f_delta_at_step(const ConstrainedOtProblem& p, const PlanMatrix& plan,
                       const Vector& a, double eta, double t_step,
                       const Vector& da, double alpha) {
  Matrix dl = Matrix::Constant(p.n, p.n, t_step);
  for (int m = 0; m < p.num_constraints(); ++m) {
    dl.noalias() += da[m] * p.constraints[m].matrix;
  }
  dl *= eta * alpha;
  const double dm = mass_delta(plan, dl);
  const double ds = slack_delta(p, a, eta, da, alpha);
  const double value = -dm / eta + alpha * t_step - ds / eta;
  return std::isnan(value) ? -kInf : value;
}

double f_tilde_delta_step(const ConstrainedOtProblem& p,
                          const PlanMatrix& plan, const Vector& a, double eta,
                          double gap, const Vector& dx, const Vector& dy,
                          const Vector& da, double alpha) {
  Matrix dl = Matrix::Zero(p.n, p.n);
  for (int m = 0; m < p.num_constraints(); ++m) {
    dl.noalias() += da[m] * p.constraints[m].matrix;
  }
  dl.rowwise() += dy.transpose();
  dl.colwise() += dx;
  dl *= eta * alpha;
  const double dm = mass_delta(plan, dl);
  const double ds = slack_delta(p, a, eta, da, alpha);
  const double linear = alpha * (dx.dot(p.r) + dy.dot(p.c));
  const double dgap = alpha * (dx.sum() - dy.sum());
  const double value =
      -dm / eta + linear - ds / eta - 0.5 * dgap * (2.0 * gap + dgap);
  return std::isnan(value) ? -kInf : value;
}

GradientVector grad_from_plan(const ConstrainedOtProblem& p,
                              const PlanMatrix& plan, const Vector& a,
                              double eta) {
  GradientVector g;
  g.gx = p.r - plan_row_sums(plan);
  g.gy = p.c - plan_col_sums(plan);
  g.ga.resize(p.num_constraints());
  for (int m = 0; m < p.num_constraints(); ++m) {
    const double coupling = plan_inner(plan, p.constraints[m].matrix);
    if (m < p.k_ineq) {
      g.ga[m] = std::exp(-eta * a[m] - 1.0) - coupling;
    } else {
      g.ga[m] = -coupling;
    }
  }
  return g;
}

}  // namespace detail

double GradientVector::l1_norm() const {
  return gx.lpNorm<1>() + gy.lpNorm<1>() + ga.lpNorm<1>();
}

PlanMatrix plan_from_duals(const ConstrainedOtProblem& p, const DualState& s) {
  check_state(p, s);
  PlanMatrix plan = detail::make_plan(p, s.x, s.y, s.a, s.eta);
  if (!plan.entries.allFinite()) {
    throw NumericalOverflow(
        "plan entries overflow; reduce eta or rescale the duals");
  }
  return plan;
}

Vector plan_log_row_sums(const PlanMatrix& plan) {
  const Matrix& l = plan.log_entries;
  Vector shifts = l.rowwise().maxCoeff();
  Vector out(l.rows());
  for (int i = 0; i < l.rows(); ++i) {
    out[i] = shifts[i] +
             std::log((l.row(i).array() - shifts[i]).exp().sum());
  }
  return out;
}

Vector plan_log_col_sums(const PlanMatrix& plan) {
  const Matrix& l = plan.log_entries;
  Vector shifts = l.colwise().maxCoeff();
  Vector out(l.cols());
  for (int j = 0; j < l.cols(); ++j) {
    out[j] = shifts[j] +
             std::log((l.col(j).array() - shifts[j]).exp().sum());
  }
  return out;
}

double plan_log_total_mass(const PlanMatrix& plan) {
  const double shift = plan.max_log;
  return shift +
         std::log((plan.log_entries.array() - shift).exp().sum());
}

Vector plan_row_sums(const PlanMatrix& plan) {
  if (plan.max_log <= kShiftThreshold) {
    return plan.entries.rowwise().sum();
  }
  return plan_log_row_sums(plan).array().exp();
}

Vector plan_col_sums(const PlanMatrix& plan) {
  if (plan.max_log <= kShiftThreshold) {
    return plan.entries.colwise().sum();
  }
  return plan_log_col_sums(plan).array().exp();
}

double plan_total_mass(const PlanMatrix& plan) {
  if (plan.max_log <= kShiftThreshold) {
    return plan.entries.sum();
  }
  return std::exp(plan_log_total_mass(plan));
}

double plan_inner(const PlanMatrix& plan, const Matrix& d) {
  if (plan.max_log <= kShiftThreshold) {
    return (plan.entries.array() * d.array()).sum();
  }
  const double shift = plan.max_log;
  const double scaled =
      ((plan.log_entries.array() - shift).exp() * d.array()).sum();
  return scaled * std::exp(shift);
}

double eval_f(const ConstrainedOtProblem& p, const DualState& s) {
  check_state(p, s);
  const double value = detail::f_value(p, s.x, s.y, s.a, s.eta);
  if (!std::isfinite(value)) {
    throw NumericalOverflow("f overflow; reduce eta or rescale the duals");
  }
  return value;
}

GradientVector grad_f(const ConstrainedOtProblem& p, const DualState& s) {
  const PlanMatrix plan = plan_from_duals(p, s);
  GradientVector g = detail::grad_from_plan(p, plan, s.a, s.eta);
  if (!g.gx.allFinite() || !g.gy.allFinite() || !g.ga.allFinite()) {
    throw NumericalOverflow("gradient overflow");
  }
  return g;
}

std::pair<double, double> eval_f_aug(const ConstrainedOtProblem& p,
                                     const Vector& x, const Vector& y,
                                     const Vector& a, double eta) {
  DualState probe{x, y, a, eta};
  check_state(p, probe);
  const PlanMatrix plan = detail::make_plan(p, x, y, a, eta);
  // 1 - eta t* = LSE(log P + 1), hence t* = -log(sum_ij P_ij)/eta.
  const double t_star = -plan_log_total_mass(plan) / eta;
  const double slack = detail::slack_sum(p, a, eta);
  const double value =
      -1.0 / eta + x.dot(p.r) + y.dot(p.c) + t_star - slack / eta;
  return {value, t_star};
}

Vector at_gradient(const ConstrainedOtProblem& p, const DualState& s) {
  const PlanMatrix plan = plan_from_duals(p, s);
  const GradientVector g = detail::grad_from_plan(p, plan, s.a, s.eta);
  const int m = p.num_constraints();
  Vector out(m + 1);
  out.head(m) = g.ga;
  out[m] = 1.0 - plan_total_mass(plan);
  if (!out.allFinite()) throw NumericalOverflow("(a,t) gradient overflow");
  return out;
}

namespace detail {

Matrix at_hessian_from_plan(const ConstrainedOtProblem& p,
                            const PlanMatrix& plan, const Vector& a,
                            double eta) {
  const int m = p.num_constraints();
  Matrix h(m + 1, m + 1);
  std::vector<Matrix> weighted(m);  // P .* D_m
  for (int i = 0; i < m; ++i) {
    weighted[i] = plan.entries.array() * p.constraints[i].matrix.array();
  }
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double value =
          (weighted[i].array() * p.constraints[j].matrix.array()).sum();
      h(i, j) = -eta * value;
      h(j, i) = h(i, j);
    }
    h(i, m) = -eta * weighted[i].sum();
    h(m, i) = h(i, m);
  }
  for (int k = 0; k < p.k_ineq; ++k) {
    h(k, k) -= eta * std::exp(-eta * a[k] - 1.0);
  }
  h(m, m) = -eta * plan.entries.sum();
  return h;
}

}  // namespace detail

Matrix at_hessian(const ConstrainedOtProblem& p, const DualState& s) {
  const PlanMatrix plan = plan_from_duals(p, s);
  Matrix h = detail::at_hessian_from_plan(p, plan, s.a, s.eta);
  if (!h.allFinite()) throw NumericalOverflow("(a,t) Hessian overflow");
  return h;
}

Vector FullHessian::apply(const Vector& z) const {
  const int n = static_cast<int>(row_mass.size());
  const int m = static_cast<int>(a_block.rows());
  const auto zx = z.segment(0, n);
  const auto zy = z.segment(n, n);
  const auto za = z.segment(2 * n, m);
  Vector out(2 * n + m);
  out.segment(0, n) = row_mass.cwiseProduct(zx) + plan * zy;
  out.segment(n, n) = plan.transpose() * zx + col_mass.cwiseProduct(zy);
  if (m > 0) {
    out.segment(0, n).noalias() += b_xa * za;
    out.segment(n, n).noalias() += b_ya * za;
    out.segment(2 * n, m) =
        b_xa.transpose() * zx + b_ya.transpose() * zy + a_block * za;
  }
  return -eta * out;
}

Matrix FullHessian::dense() const {
  const int n = static_cast<int>(row_mass.size());
  const int m = static_cast<int>(a_block.rows());
  Matrix h(2 * n + m, 2 * n + m);
  h.setZero();
  h.block(0, 0, n, n).diagonal() = row_mass;
  h.block(0, n, n, n) = plan;
  h.block(n, 0, n, n) = plan.transpose();
  h.block(n, n, n, n).diagonal() = col_mass;
  if (m > 0) {
    h.block(0, 2 * n, n, m) = b_xa;
    h.block(n, 2 * n, n, m) = b_ya;
    h.block(2 * n, 0, m, n) = b_xa.transpose();
    h.block(2 * n, n, m, n) = b_ya.transpose();
    h.block(2 * n, 2 * n, m, m) = a_block;
  }
  return -eta * h;
}

FullHessian full_hessian(const ConstrainedOtProblem& p, const DualState& s) {
  const PlanMatrix plan = plan_from_duals(p, s);
  const int m = p.num_constraints();
  FullHessian h;
  h.eta = s.eta;
  h.row_mass = plan_row_sums(plan);
  h.col_mass = plan_col_sums(plan);
  h.plan = plan.entries;
  h.b_xa.resize(p.n, m);
  h.b_ya.resize(p.n, m);
  for (int i = 0; i < m; ++i) {
    const Matrix weighted =
        plan.entries.array() * p.constraints[i].matrix.array();
    h.b_xa.col(i) = weighted.rowwise().sum();
    h.b_ya.col(i) = weighted.colwise().sum().transpose();
  }
  const Matrix at = detail::at_hessian_from_plan(p, plan, s.a, s.eta);
  h.a_block = at.topLeftCorner(m, m) / -s.eta;
  if (!h.row_mass.allFinite() || !h.b_xa.allFinite() ||
      !h.a_block.allFinite()) {
    throw NumericalOverflow("Hessian overflow");
  }
  return h;
}

double eval_f_tilde(const ConstrainedOtProblem& p, const DualState& s) {
  const double gap = s.x.sum() - s.y.sum();
  return eval_f(p, s) - 0.5 * gap * gap;
}

GradientVector grad_f_tilde(const ConstrainedOtProblem& p,
                            const DualState& s) {
  GradientVector g = grad_f(p, s);
  const double gap = s.x.sum() - s.y.sum();
  g.gx.array() -= gap;
  g.gy.array() += gap;
  return g;
}

}  // namespace cot
