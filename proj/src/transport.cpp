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

#include "cot/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cot {

RoundedPlan round_to_feasible(const Matrix& p, const Vector& r,
                              const Vector& c) {
  if (p.rows() != r.size() || p.cols() != c.size()) {
    throw InvalidInput("round_to_feasible: dimension mismatch");
  }
  if (!p.allFinite() || (p.array() < 0.0).any()) {
    throw InvalidInput("round_to_feasible: plan must be finite nonnegative");
  }
  if (p.sum() == 0.0) {
    throw InvalidInput("round_to_feasible: plan is identically zero");
  }

  Matrix out = p;

  Vector row = out.rowwise().sum();
  for (int i = 0; i < out.rows(); ++i) {
    if (row[i] > r[i]) out.row(i) *= r[i] / row[i];
  }
  Vector col = out.colwise().sum();
  for (int j = 0; j < out.cols(); ++j) {
    if (col[j] > c[j]) out.col(j) *= c[j] / col[j];
  }

  Vector err_r = r - out.rowwise().sum();
  Vector err_c = c - out.colwise().sum().transpose();
  const double deficit = err_r.lpNorm<1>();
  if (deficit > 0.0) {
    out.noalias() += err_r * err_c.transpose() / deficit;
  }

  RoundedPlan rounded;
  rounded.l1_correction = (p - out).lpNorm<1>();
  rounded.plan = std::move(out);
  return rounded;
}

RoundedPlan round_to_feasible(const PlanMatrix& p, const Vector& r,
                              const Vector& c) {
  return round_to_feasible(p.entries, r, c);
}

double transport_cost(const Matrix& plan, const Matrix& cost) {
  if (plan.rows() != cost.rows() || plan.cols() != cost.cols()) {
    throw InvalidInput("transport_cost: dimension mismatch");
  }
  return (plan.array() * cost.array()).sum();
}

double transport_score(const Matrix& plan, const Matrix& cost) {
  return -transport_cost(plan, cost);
}

double violation(const Matrix& plan, const std::vector<Constraint>& cs) {
  double total = 0.0;
  for (const Constraint& d : cs) {
    const double coupling = (plan.array() * d.matrix.array()).sum();
    if (d.kind == ConstraintKind::kInequalityGe) {
      total += std::abs(std::min(coupling, 0.0));
    } else {
      total += std::abs(coupling);
    }
  }
  return total;
}

double kl_div(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw InvalidInput("kl_div: length mismatch");
  double total = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    if (u[i] < 0.0 || v[i] < 0.0) {
      throw InvalidInput("kl_div: negative entries");
    }
    if (u[i] == 0.0) continue;
    if (v[i] == 0.0) return std::numeric_limits<double>::infinity();
    total += u[i] * std::log(u[i] / v[i]);
  }
  return total;
}

double tv_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput("tv_distance: dimension mismatch");
  }
  return 0.5 * (a - b).lpNorm<1>();
}

}  // namespace cot
