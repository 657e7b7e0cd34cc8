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

#ifndef COT_EXPERIMENTS_HPP_
#define COT_EXPERIMENTS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cot/model.hpp"
#include "cot/sns.hpp"
#include "cot/types.hpp"

namespace cot {

enum class ExperimentKind { kRandomAssignment, kRankingDcg, kParetoGeometric };
enum class AlgorithmKind { kSinkhorn, kGreedy, kSns, kScheduled };

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kRandomAssignment;
  int n = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> t_ineq;  // generator defaults apply when unset
  std::optional<double> t_eq;
  std::vector<double> t_grid;    // Pareto only; strictly increasing
  std::vector<double> etas;      // Pareto only
  AlgorithmKind algorithm = AlgorithmKind::kSns;
};

void validate_spec(const ExperimentSpec& spec);

// Uniform marginals, C and the two constraint matrices i.i.d. Unif[0,1]
// (streams 0, 1, 2 of the seed), one "<= t_ineq" inequality and one
// "= t_eq" equality, both defaulting to 1/2.
ConstrainedOtProblem gen_random_assignment(int n, std::uint64_t seed,
                                           double t_ineq = 0.5,
                                           double t_eq = 0.5);

// DCG ranking relaxation: minimize C = -g_c v^T with discount
// v_i = 1/log2(i+1) (1-indexed) and Rademacher relevance vectors g
// (streams 0, 1, 2), one ">=" inequality from g_I v^T and one equality from
// g_E v^T.  The doubly-stochastic formulation is rescaled to unit mass
// (r = c = 1/n); under that rescale the default thresholds become the
// matrix means, which makes the uniform plan exactly feasible.  To match
// runs quoted against mass-n plans, multiply eta by n.
ConstrainedOtProblem gen_ranking_dcg(int n, std::uint64_t seed,
                                     std::optional<double> t_ineq = {},
                                     std::optional<double> t_eq = {});

struct PointCloud {
  Matrix points;   // N x 2, inside the unit square
  Vector weights;  // positive, normalized to sum 1
};

PointCloud gen_random_point_cloud(int n, std::uint64_t seed);

// Grayscale image as CSV of intensities (rows = image rows); pixel (i1, i2),
// 1-indexed, becomes the point (i1/rows, i2/cols) weighted by its intensity.
PointCloud load_grayscale_csv(const std::string& path);

// Manhattan-cost transport between the clouds with the squared-Euclidean
// cost budgeted by "C2 . P <= t^2".  Clouds must have equal sizes.
ConstrainedOtProblem gen_pareto_geometric(const PointCloud& src,
                                          const PointCloud& dst, double t);

// Pairwise cost matrices for a cloud pair.
Matrix manhattan_costs(const PointCloud& src, const PointCloud& dst);
Matrix squared_euclidean_costs(const PointCloud& src, const PointCloud& dst);

// Ground-truth plan for tests: dense full-Hessian Newton on f~ (warm-started
// by `warm_iters` scaling iterations) until ||grad f||_1 <= tol.  Direct
// dense solves, no sparsification.  Throws NumericalFailure when max_iter
// Newton steps do not reach tol.
PlanMatrix dense_newton_oracle(const ConstrainedOtProblem& p, double eta,
                               double tol = 1e-12, int max_iter = 200,
                               const DualState* init = nullptr,
                               int warm_iters = 20);

struct LpVertexSolution {
  double value = 0.0;
  Matrix plan;
  int vertex_count = 0;     // distinct feasible vertices found
  bool unique_optimum = false;
};

// Exact LP optimum by enumerating basic feasible solutions of the
// standard-form system (marginals, homogenized constraints, slack columns).
// Exhaustive, so restricted to n <= 4 and K+L <= 2.  Throws Infeasible when
// no feasible vertex exists.
LpVertexSolution lp_vertex_oracle(const ConstrainedOtProblem& p);

struct ParetoPoint {
  double t = 0.0;
  double manhattan_cost = 0.0;
  double euclidean_cost = 0.0;  // value of C2 . P, compared against t^2
  double eta = 0.0;
  bool converged = false;
};

// Euclidean budget range [t_min, t_max] from two unconstrained solves:
// t_min is the W2 cost of the squared-Euclidean optimum, t_max the
// squared-Euclidean cost of the Manhattan optimum (both square-rooted).
std::pair<double, double> pareto_t_range(const PointCloud& src,
                                         const PointCloud& dst,
                                         double eta_ref,
                                         const ScheduleConfig& schedule);

// Solves gen_pareto_geometric for every (t, eta) pair with scheduled_solve
// and records the rounded costs.  Points are ordered by t, then eta; failed
// points keep converged = false and the sweep continues.  jobs > 1 runs
// points on a worker pool with deterministic merge order.
std::vector<ParetoPoint> pareto_sweep(const PointCloud& src,
                                      const PointCloud& dst,
                                      const std::vector<double>& t_grid,
                                      const std::vector<double>& etas,
                                      const ScheduleConfig& schedule,
                                      int jobs = 1);

}  // namespace cot

#endif  // COT_EXPERIMENTS_HPP_
