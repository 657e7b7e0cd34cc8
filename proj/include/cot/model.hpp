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

#ifndef COT_MODEL_HPP_
#define COT_MODEL_HPP_

#include <string>
#include <vector>

#include "cot/types.hpp"

namespace cot {

// Every constraint is stored in homogenized form: the plan P is admissible
// when matrix.cwiseProduct(P).sum() is >= 0 (InequalityGe) or == 0 (Equality).
enum class ConstraintKind { kInequalityGe, kEquality };

// How a raw threshold constraint "D.P {>=,<=,==} t" is read before
// homogenization.
enum class ThresholdSense { kGeThreshold, kLeThreshold, kEqThreshold };

struct Constraint {
  Matrix matrix;  // n x n, finite
  ConstraintKind kind;
};

// Optimal transport problem with extra linear constraints:
//
//   min C.P   over  P >= 0, P 1 = r, P^T 1 = c,
//   subject to  D_m.P >= 0 (m = 1..k_ineq)  and  D_m.P = 0 (equalities).
//
// Inequality constraints always precede equality constraints; the dual
// vector `a` follows the same ordering.  Marginals are normalized to sum
// exactly to one at construction.  Instances are immutable after
// construction and safe to share across threads.
struct ConstrainedOtProblem {
  int n = 0;
  Matrix cost;
  Vector r;
  Vector c;
  std::vector<Constraint> constraints;
  int k_ineq = 0;
  int l_eq = 0;

  int num_constraints() const { return k_ineq + l_eq; }
};

// Dual variables (x, y, a) paired with the regularization strength they are
// valid for.  The scalar t used by the constraint-dual update is transient:
// it is folded into x as x + t*1 and never stored.
struct DualState {
  Vector x;
  Vector y;
  Vector a;
  double eta = 1.0;
};

DualState zero_duals(const ConstrainedOtProblem& p, double eta);

struct ValidationResult {
  bool ok = false;
  std::string error;
  // Zero marginal entries are legal but worth surfacing; solvers treat
  // 0*log(0) as 0 in KL terms.
  bool has_zero_marginals = false;
};

// Converts "D.P sense t" into the homogenized internal form.  Valid whenever
// the plan has unit total mass:
//   GeThreshold: (D - t*1) . P >= 0
//   LeThreshold: (t*1 - D) . P >= 0
//   EqThreshold: (D - t*1) . P  = 0
Constraint homogenize_constraint(const Matrix& d, double threshold,
                                 ThresholdSense sense);

ValidationResult validate_problem(const ConstrainedOtProblem& p);

// Validates, normalizes marginals (rejecting sums further than 1e-6 from 1),
// and stably reorders constraints so inequalities come first.  Throws
// InvalidInput on any violation.
ConstrainedOtProblem make_problem(Matrix cost, Vector r, Vector c,
                                  std::vector<Constraint> constraints = {});

// Instance file format: a single JSON document
//   {"n": int, "cost": [n*n reals, row-major], "r": [...], "c": [...],
//    "constraints": [{"matrix": [n*n reals, row-major],
//                     "sense": "ge"|"le"|"eq", "threshold": real}]}
// The loader applies homogenize_constraint to every entry.  save_instance
// writes the already-homogenized matrices with threshold 0, which reloads
// to an identical problem.
ConstrainedOtProblem load_instance(const std::string& path);
ConstrainedOtProblem parse_instance(const std::string& json_text);
void save_instance(const ConstrainedOtProblem& p, const std::string& path);

}  // namespace cot

#endif  // COT_MODEL_HPP_
