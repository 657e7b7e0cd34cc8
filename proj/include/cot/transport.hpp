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

#ifndef COT_TRANSPORT_HPP_
#define COT_TRANSPORT_HPP_

#include <vector>

#include "cot/lyapunov.hpp"
#include "cot/model.hpp"
#include "cot/types.hpp"

namespace cot {

struct RoundedPlan {
  Matrix plan;           // row sums r, column sums c, entries >= 0
  double l1_correction;  // ||input - plan||_1 actually applied
};

// Projects a nonnegative matrix into the transport polytope U_{r,c}:
// rows are rescaled by min(1, r_i / (P1)_i), columns by
// min(1, c_j / (P'^T 1)_j), and the remaining deficit is filled with the
// rank-one matrix err_r err_c^T / ||err_r||_1.  The L1 change is bounded by
// 2(||P1 - r||_1 + ||P^T 1 - c||_1).  Feasible inputs pass through exactly.
RoundedPlan round_to_feasible(const Matrix& p, const Vector& r,
                              const Vector& c);
RoundedPlan round_to_feasible(const PlanMatrix& p, const Vector& r,
                              const Vector& c);

// Entry-wise inner products C.P of a (rounded) plan with the cost matrix;
// score is the negated cost, used by maximization problems such as ranking.
double transport_cost(const Matrix& plan, const Matrix& cost);
double transport_score(const Matrix& plan, const Matrix& cost);

// sum_k |min(D_k.P, 0)| over inequalities plus sum_l |D_{l+K}.P| over
// equalities; zero exactly on the feasible set.
double violation(const Matrix& plan, const std::vector<Constraint>& cs);

// KL divergence with 0 log 0 = 0; returns +inf when u_i > 0 but v_i = 0.
double kl_div(const Vector& u, const Vector& v);

// Half the entry-wise L1 distance.
double tv_distance(const Matrix& a, const Matrix& b);

}  // namespace cot

#endif  // COT_TRANSPORT_HPP_
