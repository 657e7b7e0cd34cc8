#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "cot/experiments.hpp"
#include "cot/sns.hpp"
#include "cot/transport.hpp"
#include "test_support.hpp"

using cot::Matrix;
using cot::Vector;
using cot_test::random_duals;
using cot_test::random_problem;

namespace {

cot::ConstrainedOtProblem symmetric_2x2() {
  Matrix cost(2, 2);
  cost << 0.0, 1.0, 1.0, 0.0;
  const Vector half = Vector::Constant(2, 0.5);
  return cot::make_problem(cost, half, half, {});
}

int newton_iteration_count(const cot::SolveReport& report) {
  int count = 0;
  for (const cot::TraceRecord& rec : report.trace) count += rec.kind == 'n';
  return count;
}

}  // namespace

TEST_CASE("sparsify: budget covering everything returns the plan") {
  const cot::ConstrainedOtProblem p = random_problem(4, 0, 0, 1);
  const cot::PlanMatrix plan = cot::plan_from_duals(p, cot::zero_duals(p, 1.0));
  const cot::SparseMatrix sparse = cot::sparsify(plan, 16);
  CHECK((Matrix(sparse) - plan.entries).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("sparsify: keeps exactly the dominant diagonal") {
  cot::PlanMatrix plan;
  plan.entries = Matrix::Constant(4, 4, 0.01);
  plan.entries.diagonal().setConstant(0.2);
  plan.log_entries = plan.entries.array().log();
  plan.max_log = plan.log_entries.maxCoeff();
  const cot::SparseMatrix sparse = cot::sparsify(plan, 4);
  CHECK(sparse.nonZeros() == 4);
  const Matrix dense(sparse);
  for (int i = 0; i < 4; ++i) CHECK(dense(i, i) == 0.2);
  CHECK(dense.sum() == doctest::Approx(0.8));
}

TEST_CASE("sparsify: agrees with a sort-based oracle") {
  cot::SplitMix64 rng(17);
  cot::PlanMatrix plan;
  plan.entries.resize(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) plan.entries(i, j) = rng.uniform01();
  }
  plan.log_entries = plan.entries.array().log();
  plan.max_log = plan.log_entries.maxCoeff();

  const int budget = 12;
  std::vector<double> values(plan.entries.data(),
                             plan.entries.data() + plan.entries.size());
  std::sort(values.begin(), values.end(), std::greater<double>());
  const double rho = values[budget - 1];

  const Matrix dense(cot::sparsify(plan, budget));
  int kept = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      if (dense(i, j) != 0.0) {
        ++kept;
        CHECK(dense(i, j) == plan.entries(i, j));
        CHECK(plan.entries(i, j) >= rho);
      }
    }
  }
  CHECK(kept == budget);
}

TEST_CASE("sparsify: ties at the threshold drop in (row, col) order") {
  cot::PlanMatrix plan;
  plan.entries = Matrix::Constant(3, 3, 0.1);
  plan.entries(0, 0) = 0.5;
  plan.entries(2, 2) = 0.5;
  plan.log_entries = plan.entries.array().log();
  plan.max_log = plan.log_entries.maxCoeff();
  const Matrix dense(cot::sparsify(plan, 4));
  // The two 0.5 entries survive, then ties at 0.1 fill in scan order:
  // (0,1) and (0,2).
  CHECK(dense(0, 0) == 0.5);
  CHECK(dense(2, 2) == 0.5);
  CHECK(dense(0, 1) == 0.1);
  CHECK(dense(0, 2) == 0.1);
  CHECK(dense(1, 0) == 0.0);
  CHECK(Matrix(dense).cwiseAbs().array().sign().sum() == 4.0);
}

TEST_CASE("sparse hessian: untruncated product matches the full Hessian") {
  const cot::ConstrainedOtProblem p = random_problem(5, 1, 1, 8);
  const cot::DualState s = random_duals(p, 1.4, 8);
  const cot::PlanMatrix plan = cot::plan_from_duals(p, s);
  const cot::SparseHessian sparse =
      cot::build_sparse_hessian(p, plan, s.a, s.eta, p.n * p.n, false);
  const cot::FullHessian full = cot::full_hessian(p, s);
  cot::SplitMix64 rng(3);
  for (int probe = 0; probe < 8; ++probe) {
    Vector z(sparse.dim());
    for (int i = 0; i < z.size(); ++i) z[i] = rng.uniform01() - 0.5;
    CHECK((sparse.apply(z) - full.apply(z)).lpNorm<Eigen::Infinity>() <=
          1e-12);
  }
}

TEST_CASE("sparse hessian: regularizer subtracts the rank-one vv^T") {
  const cot::ConstrainedOtProblem p = random_problem(4, 1, 0, 9);
  const cot::DualState s = random_duals(p, 1.1, 9);
  const cot::PlanMatrix plan = cot::plan_from_duals(p, s);
  const cot::SparseHessian plain =
      cot::build_sparse_hessian(p, plan, s.a, s.eta, p.n * p.n, false);
  const cot::SparseHessian reg =
      cot::build_sparse_hessian(p, plan, s.a, s.eta, p.n * p.n, true);
  Vector v = Vector::Zero(plain.dim());
  v.head(p.n).setOnes();
  v.segment(p.n, p.n).setConstant(-1.0);
  // H_reg v = H v - v (v^T v), and the xy sub-block alone annihilates v.
  const Vector hv = plain.apply(v);
  const Vector hv_reg = reg.apply(v);
  CHECK((hv_reg - (hv - v * v.squaredNorm())).lpNorm<Eigen::Infinity>() <=
        1e-12);
  CHECK(hv.head(2 * p.n).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("cg_solve: negated identity returns the right-hand side") {
  cot::SparseHessian h;
  h.eta = 1.0;
  h.diag_r = Vector::Ones(3);
  h.diag_c = Vector::Ones(3);
  h.p_sparse = cot::SparseMatrix(3, 3);
  h.b_xa = Matrix::Zero(3, 0);
  h.b_ya = Matrix::Zero(3, 0);
  h.a_block = Matrix::Zero(0, 0);
  h.regularized = false;
  // apply(z) = -z, i.e. H = -I on the 6-dimensional (x, y) space.
  Vector g(6);
  g << 1.0, -2.0, 0.5, 3.0, 0.0, -1.0;
  cot::SnsConfig cfg;
  const cot::CgResult result = cot::cg_solve(h, g, cfg);
  CHECK(result.converged);
  CHECK((result.dz - g).lpNorm<Eigen::Infinity>() <= 1e-12);

  const cot::CgResult zero = cot::cg_solve(h, Vector::Zero(6), cfg);
  CHECK(zero.converged);
  CHECK(zero.dz.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("cg_solve: matches a dense direct solve on a regularized system") {
  const cot::ConstrainedOtProblem p = random_problem(10, 1, 1, 13);
  cot::DualState s = random_duals(p, 1.5, 13);
  s = cot::x_update(p, s);
  const cot::PlanMatrix plan = cot::plan_from_duals(p, s);
  const cot::SparseHessian sparse =
      cot::build_sparse_hessian(p, plan, s.a, s.eta, p.n * p.n, true);

  Vector v = Vector::Zero(sparse.dim());
  v.head(p.n).setOnes();
  v.segment(p.n, p.n).setConstant(-1.0);
  Matrix dense = cot::full_hessian(p, s).dense();
  dense.noalias() -= v * v.transpose();

  cot::SplitMix64 rng(5);
  Vector g(sparse.dim());
  for (int i = 0; i < g.size(); ++i) g[i] = rng.uniform01() - 0.5;

  cot::SnsConfig cfg;
  cfg.cg_tol = 1e-12;
  const cot::CgResult result = cot::cg_solve(sparse, g, cfg);
  CHECK(result.converged);
  // Postcondition ||H dz + g|| <= tol ||g||.
  CHECK((dense * result.dz + g).norm() <= 10.0 * cfg.cg_tol * g.norm());
  const Vector direct = (-dense).llt().solve(g);
  CHECK((result.dz - direct).lpNorm<Eigen::Infinity>() <=
        1e-8 * std::max(1.0, direct.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("sns_solve: symmetric 2x2 reaches the closed form") {
  const cot::ConstrainedOtProblem p = symmetric_2x2();
  cot::SnsConfig cfg;
  cfg.n1 = 5;
  cfg.n2 = 10;
  cfg.tol_grad_l1 = 1e-12;
  const cot::SolveReport report =
      cot::sns_solve(p, cfg, 1.0, cot::zero_duals(p, 1.0));
  CHECK(report.status == cot::SolveStatus::kConverged);
  CHECK(report.final_grad_l1 <= 1e-12);
  const Matrix plan = cot::plan_from_duals(p, report.final_state).entries;
  const double diag = 1.0 / (2.0 * (1.0 + std::exp(-1.0)));
  CHECK(plan(0, 0) == doctest::Approx(diag).epsilon(1e-12));
  CHECK(plan(0, 1) == doctest::Approx(diag * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("sns_solve: full budget replicates dense Newton iterates") {
  const cot::ConstrainedOtProblem p = random_problem(6, 1, 1, 21);
  const double eta = 4.0;
  const int warm = 4;

  for (int newton_steps = 1; newton_steps <= 3; ++newton_steps) {
    cot::SnsConfig cfg;
    cfg.n1 = warm;
    cfg.n2 = newton_steps;
    cfg.nnz_budget = p.n * p.n;
    cfg.cg_tol = 1e-14;
    cfg.tol_grad_l1 = 1e-300;
    const cot::SolveReport report =
        cot::sns_solve(p, cfg, eta, cot::zero_duals(p, eta));

    // Independent dense replica: same warm start, projection, and line
    // search, but direct LLT solves on the assembled dense Hessian.
    cot::SolverConfig warm_cfg;
    warm_cfg.eta = eta;
    warm_cfg.max_iter = warm;
    warm_cfg.tol_grad_l1 = 1e-300;
    cot::DualState state =
        cot::sinkhorn_solve(p, warm_cfg, cot::zero_duals(p, eta)).final_state;
    const double shift = (state.x.sum() - state.y.sum()) / (2.0 * p.n);
    state.x.array() -= shift;
    state.y.array() += shift;
    const int dim = 2 * p.n + p.num_constraints();
    Vector v = Vector::Zero(dim);
    v.head(p.n).setOnes();
    v.segment(p.n, p.n).setConstant(-1.0);
    for (int it = 0; it < newton_steps; ++it) {
      const cot::PlanMatrix plan =
          cot::detail::make_plan(p, state.x, state.y, state.a, eta);
      const double gap = state.x.sum() - state.y.sum();
      cot::GradientVector gt =
          cot::detail::grad_from_plan(p, plan, state.a, eta);
      gt.gx.array() -= gap;
      gt.gy.array() += gap;
      Vector g(dim);
      g << gt.gx, gt.gy, gt.ga;
      Matrix dense = cot::full_hessian(p, state).dense();
      dense.noalias() -= v * v.transpose();
      const Vector dz = (-dense).llt().solve(g);
      double alpha = 1.0;
      while (alpha >= 1e-14) {
        const double gain = cot::detail::f_tilde_delta_step(
            p, plan, state.a, eta, gap, dz.head(p.n), dz.segment(p.n, p.n),
            dz.tail(p.num_constraints()), alpha);
        if (gain >= 1e-4 * alpha * g.dot(dz)) {
          state.x += alpha * dz.head(p.n);
          state.y += alpha * dz.segment(p.n, p.n);
          state.a += alpha * dz.tail(p.num_constraints());
          break;
        }
        alpha *= 0.5;
      }
    }
    CHECK((report.final_state.x - state.x).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((report.final_state.y - state.y).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((report.final_state.a - state.a).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("sns_solve: f~ non-decreasing and stationarity transfers to f") {
  const cot::ConstrainedOtProblem p = random_problem(8, 1, 1, 33);
  cot::SnsConfig cfg;
  cfg.n1 = 10;
  cfg.n2 = 40;
  cfg.tol_grad_l1 = 1e-11;
  const cot::SolveReport report =
      cot::sns_solve(p, cfg, 6.0, cot::zero_duals(p, 6.0));
  REQUIRE(report.status == cot::SolveStatus::kConverged);
  for (std::size_t i = 1; i < report.trace.size(); ++i) {
    CHECK(report.trace[i].f >= report.trace[i - 1].f - 1e-10);
  }
  // One exact t-recentering, then the plain gradient must be small too.
  cot::DualState state = report.final_state;
  const auto [value, t_star] =
      cot::eval_f_aug(p, state.x, state.y, state.a, state.eta);
  state.x.array() += t_star;
  CHECK(cot::grad_f(p, state).l1_norm() <= cfg.tol_grad_l1 + 1e-8);
}

TEST_CASE("sns_solve: deterministic traces") {
  const cot::ConstrainedOtProblem p = random_problem(6, 1, 1, 44);
  cot::SnsConfig cfg;
  cfg.n1 = 5;
  cfg.n2 = 10;
  const cot::SolveReport a = cot::sns_solve(p, cfg, 3.0, cot::zero_duals(p, 3.0));
  const cot::SolveReport b = cot::sns_solve(p, cfg, 3.0, cot::zero_duals(p, 3.0));
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].f == b.trace[i].f);
    CHECK(a.trace[i].grad_l1 == b.trace[i].grad_l1);
  }
}

TEST_CASE("scheduled_solve: eta_target 1 equals a single sns run") {
  const cot::ConstrainedOtProblem p = random_problem(5, 1, 1, 55);
  cot::ScheduleConfig schedule;
  schedule.final_tol = 1e-10;
  const cot::SolveReport scheduled = cot::scheduled_solve(p, 1.0, schedule);
  REQUIRE(scheduled.stages.size() == 1);
  CHECK(scheduled.stages[0].eta == 1.0);

  cot::SnsConfig direct_cfg = schedule.base;
  direct_cfg.n2 = std::max(schedule.base.n2, schedule.final_newton_cap);
  direct_cfg.tol_grad_l1 = schedule.final_tol;
  const cot::SolveReport direct =
      cot::sns_solve(p, direct_cfg, 1.0, cot::zero_duals(p, 1.0));
  CHECK((scheduled.final_state.x - direct.final_state.x)
            .lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((scheduled.final_state.a - direct.final_state.a)
            .lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("scheduled_solve: eta_target 8 visits 1, 2, 4, 8") {
  const cot::ConstrainedOtProblem p = random_problem(5, 1, 1, 56);
  cot::ScheduleConfig schedule;
  const cot::SolveReport report = cot::scheduled_solve(p, 8.0, schedule);
  REQUIRE(report.stages.size() == 4);
  CHECK(report.stages[0].eta == 1.0);
  CHECK(report.stages[1].eta == 2.0);
  CHECK(report.stages[2].eta == 4.0);
  CHECK(report.stages[3].eta == 8.0);
  CHECK(report.status == cot::SolveStatus::kConverged);
}

TEST_CASE("scheduled_solve: warm starting beats a cold high-eta solve") {
  // Euclidean-budget instance with an active constraint, solved to a weak
  // regularization: the doubling schedule should need fewer Newton steps
  // than a cold start at the target eta.
  const cot::PointCloud src = cot::gen_random_point_cloud(30, 570);
  const cot::PointCloud dst = cot::gen_random_point_cloud(30, 571);
  cot::ScheduleConfig schedule;
  schedule.final_tol = 1e-10;
  const auto [t_min, t_max] = cot::pareto_t_range(src, dst, 1e3, schedule);
  const cot::ConstrainedOtProblem p =
      cot::gen_pareto_geometric(src, dst, 0.5 * (t_min + t_max));
  const double eta_target = 1000.0;

  const cot::SolveReport warm = cot::scheduled_solve(p, eta_target, schedule);
  REQUIRE(warm.status == cot::SolveStatus::kConverged);

  cot::SnsConfig cold_cfg = schedule.base;
  cold_cfg.n1 = 20;
  cold_cfg.n2 = 2000;
  cold_cfg.tol_grad_l1 = schedule.final_tol;
  const cot::SolveReport cold =
      cot::sns_solve(p, cold_cfg, eta_target, cot::zero_duals(p, eta_target));
  if (cold.status == cot::SolveStatus::kConverged) {
    CHECK(newton_iteration_count(warm) < newton_iteration_count(cold));
  } else {
    CHECK(true);  // cold start failed outright; warm start clearly wins
  }
}
