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

#include "cot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "cot/rng.hpp"
#include "cot/transport.hpp"

namespace cot {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

Matrix random_uniform_matrix(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = rng.uniform01();
  }
  return m;
}

Vector rademacher_vector(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.rademacher();
  return v;
}

}  // namespace

void validate_spec(const ExperimentSpec& spec) {
  if (spec.n < 2) throw InvalidInput("experiment n must be >= 2");
  if (spec.kind != ExperimentKind::kParetoGeometric && !(spec.eta > 0.0)) {
    throw InvalidInput("experiment eta must be positive");
  }
  for (std::size_t i = 1; i < spec.t_grid.size(); ++i) {
    if (!(spec.t_grid[i] > spec.t_grid[i - 1])) {
      throw InvalidInput("t_grid must be strictly increasing");
    }
  }
}

ConstrainedOtProblem gen_random_assignment(int n, std::uint64_t seed,
                                           double t_ineq, double t_eq) {
  if (n < 2) throw InvalidInput("gen_random_assignment: n must be >= 2");
  Matrix cost = random_uniform_matrix(n, sub_seed(seed, 0));
  Matrix d_ineq = random_uniform_matrix(n, sub_seed(seed, 1));
  Matrix d_eq = random_uniform_matrix(n, sub_seed(seed, 2));
  std::vector<Constraint> cs;
  cs.push_back(
      homogenize_constraint(d_ineq, t_ineq, ThresholdSense::kLeThreshold));
  cs.push_back(
      homogenize_constraint(d_eq, t_eq, ThresholdSense::kEqThreshold));
  const Vector uniform = Vector::Constant(n, 1.0 / n);
  return make_problem(std::move(cost), uniform, uniform, std::move(cs));
}

ConstrainedOtProblem gen_ranking_dcg(int n, std::uint64_t seed,
                                     std::optional<double> t_ineq,
                                     std::optional<double> t_eq) {
  if (n < 2) throw InvalidInput("gen_ranking_dcg: n must be >= 2");
  Vector discount(n);
  for (int i = 0; i < n; ++i) {
    discount[i] = 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  const Vector g_cost = rademacher_vector(n, sub_seed(seed, 0));
  const Vector g_ineq = rademacher_vector(n, sub_seed(seed, 1));
  const Vector g_eq = rademacher_vector(n, sub_seed(seed, 2));

  Matrix d_ineq = g_ineq * discount.transpose();
  Matrix d_eq = g_eq * discount.transpose();
  const double ti = t_ineq.value_or(d_ineq.mean());
  const double te = t_eq.value_or(d_eq.mean());

  std::vector<Constraint> cs;
  cs.push_back(homogenize_constraint(d_ineq, ti, ThresholdSense::kGeThreshold));
  cs.push_back(homogenize_constraint(d_eq, te, ThresholdSense::kEqThreshold));
  Matrix cost = -(g_cost * discount.transpose());
  const Vector uniform = Vector::Constant(n, 1.0 / n);
  return make_problem(std::move(cost), uniform, uniform, std::move(cs));
}

PointCloud gen_random_point_cloud(int n, std::uint64_t seed) {
  if (n < 1) throw InvalidInput("gen_random_point_cloud: n must be >= 1");
  SplitMix64 point_rng(sub_seed(seed, 0));
  SplitMix64 weight_rng(sub_seed(seed, 1));
  PointCloud cloud;
  cloud.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    cloud.points(i, 0) = point_rng.uniform01();
    cloud.points(i, 1) = point_rng.uniform01();
  }
  cloud.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    cloud.weights[i] = 0.25 + weight_rng.uniform01();
  }
  cloud.weights /= cloud.weights.sum();
  return cloud;
}

PointCloud load_grayscale_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open grayscale CSV: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidInput("grayscale CSV: non-numeric cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidInput("grayscale CSV: ragged rows");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput("grayscale CSV: empty file");

  const int height = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows.front().size());
  std::vector<std::pair<Eigen::Vector2d, double>> pixels;
  double total = 0.0;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double intensity = rows[i][j];
      if (intensity < 0.0) {
        throw InvalidInput("grayscale CSV: negative intensity");
      }
      if (intensity > 0.0) {
        pixels.push_back({Eigen::Vector2d((i + 1.0) / height,
                                          (j + 1.0) / width),
                          intensity});
        total += intensity;
      }
    }
  }
  if (pixels.empty()) throw InvalidInput("grayscale CSV: all-zero image");

  PointCloud cloud;
  cloud.points.resize(static_cast<int>(pixels.size()), 2);
  cloud.weights.resize(static_cast<int>(pixels.size()));
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    cloud.points.row(static_cast<int>(k)) = pixels[k].first.transpose();
    cloud.weights[static_cast<int>(k)] = pixels[k].second / total;
  }
  return cloud;
}

Matrix manhattan_costs(const PointCloud& src, const PointCloud& dst) {
  Matrix c(src.points.rows(), dst.points.rows());
  for (int i = 0; i < src.points.rows(); ++i) {
    for (int j = 0; j < dst.points.rows(); ++j) {
      c(i, j) = (src.points.row(i) - dst.points.row(j)).lpNorm<1>();
    }
  }
  return c;
}

Matrix squared_euclidean_costs(const PointCloud& src, const PointCloud& dst) {
  Matrix c(src.points.rows(), dst.points.rows());
  for (int i = 0; i < src.points.rows(); ++i) {
    for (int j = 0; j < dst.points.rows(); ++j) {
      c(i, j) = (src.points.row(i) - dst.points.row(j)).squaredNorm();
    }
  }
  return c;
}

namespace {

void check_cloud(const PointCloud& cloud) {
  if (cloud.points.rows() != cloud.weights.size() ||
      cloud.points.cols() != 2) {
    throw InvalidInput("point cloud: mismatched point/weight lengths");
  }
  if (cloud.points.minCoeff() < -1e-12 ||
      cloud.points.maxCoeff() > 1.0 + 1e-12) {
    throw InvalidInput("point cloud: points must lie in the unit square");
  }
}

}  // namespace

ConstrainedOtProblem gen_pareto_geometric(const PointCloud& src,
                                          const PointCloud& dst, double t) {
  check_cloud(src);
  check_cloud(dst);
  if (src.points.rows() != dst.points.rows()) {
    throw InvalidInput("gen_pareto_geometric: clouds must have equal sizes");
  }
  if (t < 0.0) throw InvalidInput("gen_pareto_geometric: t must be >= 0");
  Matrix c1 = manhattan_costs(src, dst);
  Matrix c2 = squared_euclidean_costs(src, dst);
  std::vector<Constraint> cs;
  cs.push_back(
      homogenize_constraint(c2, t * t, ThresholdSense::kLeThreshold));
  return make_problem(std::move(c1), src.weights, dst.weights, std::move(cs));
}

PlanMatrix dense_newton_oracle(const ConstrainedOtProblem& p, double eta,
                               double tol, int max_iter,
                               const DualState* init, int warm_iters) {
  if (!(eta > 0.0) || !(tol > 0.0)) {
    throw InvalidInput("dense_newton_oracle: eta and tol must be positive");
  }
  DualState state = init != nullptr ? *init : zero_duals(p, eta);
  state.eta = eta;

  if (warm_iters > 0) {
    SolverConfig warm;
    warm.eta = eta;
    warm.max_iter = warm_iters;
    warm.tol_grad_l1 = tol;
    SolveReport rep = sinkhorn_solve(p, warm, state);
    if (rep.status == SolveStatus::kNumericalFailure) {
      throw NumericalFailure("dense_newton_oracle: warm start failed: " +
                             rep.message);
    }
    state = rep.final_state;
  }

  const int n = p.n;
  const int m = p.num_constraints();
  const int dim = 2 * n + m;
  Vector v = Vector::Zero(dim);
  v.segment(0, n).setOnes();
  v.segment(n, n).setConstant(-1.0);

  // Remove the degenerate translation component once at entry.
  const double shift = (state.x.sum() - state.y.sum()) / (2.0 * n);
  state.x.array() -= shift;
  state.y.array() += shift;

  for (int it = 0; it < max_iter; ++it) {
    const PlanMatrix plan =
        detail::make_plan(p, state.x, state.y, state.a, eta);
    const GradientVector gf =
        detail::grad_from_plan(p, plan, state.a, state.eta);
    if (gf.l1_norm() <= tol) return plan_from_duals(p, state);

    const double gap = state.x.sum() - state.y.sum();
    Vector g_tilde(dim);
    g_tilde << gf.gx.array() - gap, gf.gy.array() + gap, gf.ga;

    Matrix h = full_hessian(p, state).dense();
    h.noalias() -= v * v.transpose();
    const double h_scale = h.cwiseAbs().maxCoeff();
    Matrix a = -h;
    a.diagonal().array() += 1e-12 * (1.0 + h_scale);
    Eigen::LLT<Matrix> llt(a);
    Vector dz;
    if (llt.info() == Eigen::Success) {
      dz = llt.solve(g_tilde);
    } else {
      dz = g_tilde;
    }
    double slope = g_tilde.dot(dz);
    if (!(slope > 0.0)) {
      dz = g_tilde;
      slope = g_tilde.squaredNorm();
    }

    double alpha = 1.0;
    bool accepted = false;
    while (alpha >= 1e-14) {
      const double gain = detail::f_tilde_delta_step(
          p, plan, state.a, eta, gap, dz.segment(0, n), dz.segment(n, n),
          dz.segment(2 * n, m), alpha);
      if (gain >= 1e-4 * alpha * slope) {
        state.x += alpha * dz.segment(0, n);
        state.y += alpha * dz.segment(n, n);
        state.a += alpha * dz.segment(2 * n, m);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (gf.l1_norm() <= 10.0 * tol) return plan_from_duals(p, state);
      throw NumericalFailure("dense_newton_oracle: line search collapsed");
    }
  }
  if (grad_f(p, state).l1_norm() <= tol) return plan_from_duals(p, state);
  throw NumericalFailure("dense_newton_oracle: no convergence within cap");
}

LpVertexSolution lp_vertex_oracle(const ConstrainedOtProblem& p) {
  if (p.n > 4 || p.num_constraints() > 2) {
    throw InvalidInput("lp_vertex_oracle: limited to n <= 4 and K+L <= 2");
  }
  const int n = p.n;
  const int k = p.k_ineq;
  const int l = p.l_eq;
  const int num_vars = n * n + k;  // vec(P) plus inequality slacks
  const int num_rows = 2 * n + k + l;

  Matrix a = Matrix::Zero(num_rows, num_vars);
  Vector b = Vector::Zero(num_rows);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, i * n + j) = 1.0;
    b[i] = p.r[i];
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) a(n + j, i * n + j) = 1.0;
    b[n + j] = p.c[j];
  }
  for (int m = 0; m < k + l; ++m) {
    const Matrix& d = p.constraints[m].matrix;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(2 * n + m, i * n + j) = d(i, j);
    }
    if (m < k) a(2 * n + m, n * n + m) = -1.0;  // D_m . P - s_m = 0
  }

  Eigen::ColPivHouseholderQR<Matrix> rank_qr(a);
  rank_qr.setThreshold(1e-10);
  const int rank = static_cast<int>(rank_qr.rank());

  constexpr double kFeasTol = 1e-9;
  std::vector<Matrix> optimal_plans;
  double best = std::numeric_limits<double>::infinity();
  int vertex_count = 0;
  std::vector<Matrix> seen_plans;

  std::vector<bool> mask(num_vars, false);
  std::fill(mask.begin(), mask.begin() + rank, true);
  Matrix basis(num_rows, rank);
  do {
    int col = 0;
    for (int jv = 0; jv < num_vars; ++jv) {
      if (mask[jv]) basis.col(col++) = a.col(jv);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    qr.setThreshold(1e-10);
    if (static_cast<int>(qr.rank()) < rank) continue;
    const Vector solution = qr.solve(b);
    if ((basis * solution - b).lpNorm<Eigen::Infinity>() >
        kFeasTol * (1.0 + b.lpNorm<Eigen::Infinity>())) {
      continue;
    }
    if ((solution.array() < -kFeasTol).any()) continue;

    Matrix plan = Matrix::Zero(n, n);
    col = 0;
    for (int jv = 0; jv < num_vars; ++jv) {
      if (!mask[jv]) continue;
      const double value = std::max(solution[col++], 0.0);
      if (jv < n * n) plan(jv / n, jv % n) = value;
    }

    bool new_vertex = true;
    for (const Matrix& q : seen_plans) {
      if ((q - plan).lpNorm<Eigen::Infinity>() <= 1e-7) {
        new_vertex = false;
        break;
      }
    }
    if (new_vertex) {
      seen_plans.push_back(plan);
      ++vertex_count;
    }

    const double value = (plan.array() * p.cost.array()).sum();
    if (value < best - 1e-9) {
      best = value;
      optimal_plans.clear();
      optimal_plans.push_back(plan);
    } else if (value <= best + 1e-9) {
      bool duplicate = false;
      for (const Matrix& q : optimal_plans) {
        if ((q - plan).lpNorm<Eigen::Infinity>() <= 1e-7) {
          duplicate = true;
          break;
        }
      }
      if (!duplicate) optimal_plans.push_back(plan);
    }
  } while (std::prev_permutation(mask.begin(), mask.end()));

  if (optimal_plans.empty()) {
    throw Infeasible("lp_vertex_oracle: no feasible basic solution");
  }
  LpVertexSolution result;
  result.value = best;
  result.plan = optimal_plans.front();
  result.vertex_count = vertex_count;
  result.unique_optimum = optimal_plans.size() == 1;
  return result;
}

std::pair<double, double> pareto_t_range(const PointCloud& src,
                                         const PointCloud& dst,
                                         double eta_ref,
                                         const ScheduleConfig& schedule) {
  const Matrix c1 = manhattan_costs(src, dst);
  const Matrix c2 = squared_euclidean_costs(src, dst);

  auto solve_unconstrained = [&](const Matrix& cost) {
    ConstrainedOtProblem prob =
        make_problem(cost, src.weights, dst.weights, {});
    SolveReport rep = scheduled_solve(prob, eta_ref, schedule);
    const PlanMatrix plan = plan_from_duals(prob, rep.final_state);
    return round_to_feasible(plan.entries, prob.r, prob.c).plan;
  };

  const Matrix w2_plan = solve_unconstrained(c2);
  const Matrix manhattan_plan = solve_unconstrained(c1);
  const double t_min = std::sqrt((w2_plan.array() * c2.array()).sum());
  const double t_max =
      std::sqrt((manhattan_plan.array() * c2.array()).sum());
  return {t_min, t_max};
}

std::vector<ParetoPoint> pareto_sweep(const PointCloud& src,
                                      const PointCloud& dst,
                                      const std::vector<double>& t_grid,
                                      const std::vector<double>& etas,
                                      const ScheduleConfig& schedule,
                                      int jobs) {
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) {
      throw InvalidInput("pareto_sweep: t_grid must be strictly increasing");
    }
  }
  const Matrix c1 = manhattan_costs(src, dst);
  const Matrix c2 = squared_euclidean_costs(src, dst);

  struct Task {
    double t;
    double eta;
  };
  std::vector<Task> tasks;
  for (double t : t_grid) {
    for (double eta : etas) tasks.push_back({t, eta});
  }

  auto run_point = [&](const Task& task) {
    ParetoPoint point;
    point.t = task.t;
    point.eta = task.eta;
    point.manhattan_cost = kNan;
    point.euclidean_cost = kNan;
    point.converged = false;
    try {
      const ConstrainedOtProblem prob = gen_pareto_geometric(src, dst, task.t);
      const SolveReport rep = scheduled_solve(prob, task.eta, schedule);
      const PlanMatrix plan = plan_from_duals(prob, rep.final_state);
      const Matrix rounded = round_to_feasible(plan.entries, prob.r,
                                               prob.c).plan;
      point.manhattan_cost = (rounded.array() * c1.array()).sum();
      point.euclidean_cost = (rounded.array() * c2.array()).sum();
      point.converged = rep.status == SolveStatus::kConverged;
    } catch (const std::exception&) {
      point.converged = false;
    }
    return point;
  };

  std::vector<ParetoPoint> points(tasks.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      points[i] = run_point(tasks[i]);
    }
  } else {
    // Batches of `jobs` solves; results merge back in task order.
    std::size_t next = 0;
    while (next < tasks.size()) {
      const std::size_t batch =
          std::min<std::size_t>(jobs, tasks.size() - next);
      std::vector<std::future<ParetoPoint>> futures;
      futures.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        const Task task = tasks[next + b];
        futures.push_back(std::async(std::launch::async, [&run_point, task] {
          return run_point(task);
        }));
      }
      for (std::size_t b = 0; b < batch; ++b) {
        points[next + b] = futures[b].get();
      }
      next += batch;
    }
  }
  return points;
}

}  // namespace cot
