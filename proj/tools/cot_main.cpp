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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cot/checks.hpp"
#include "cot/experiments.hpp"
#include "cot/model.hpp"
#include "cot/rng.hpp"
#include "cot/report_io.hpp"
#include "cot/sinkhorn.hpp"
#include "cot/sns.hpp"
#include "cot/transport.hpp"

namespace {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("COT_LOG");
    if (env == nullptr) return LogLevel::kError;
    const std::string value(env);
    if (value == "debug") return LogLevel::kDebug;
    if (value == "info") return LogLevel::kInfo;
    return LogLevel::kError;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::fprintf(stderr, "%s\n", msg.c_str());
}

struct SolveOptions {
  std::string instance_path;
  std::string algorithm = "sinkhorn";
  double eta = 0.0;
  double eta_target = 0.0;
  double tol = 1e-6;
  int max_iter = 10000;
  int n1 = 20;
  int n2 = 30;
  int nnz_budget = 0;
  std::string output_path;
  std::string trace_path;
  bool emit_plan = false;
};

void write_file_or_stdout(const std::string& path, const std::string& body) {
  if (path.empty()) {
    std::cout << body << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw cot::InvalidInput("cannot write output file: " + path);
  out << body << "\n";
}

cot::SolveReport dispatch_solve(const cot::ConstrainedOtProblem& problem,
                                const SolveOptions& opt, bool record_metrics) {
  using cot::SolveReport;
  if (opt.algorithm == "sinkhorn" || opt.algorithm == "greedy") {
    if (!(opt.eta > 0.0)) throw cot::InvalidInput("--eta is required");
    cot::SolverConfig cfg;
    cfg.eta = opt.eta;
    cfg.tol_grad_l1 = opt.tol;
    cfg.max_iter = opt.max_iter;
    cfg.record_metrics = record_metrics;
    const cot::DualState init = cot::zero_duals(problem, opt.eta);
    return opt.algorithm == "sinkhorn"
               ? cot::sinkhorn_solve(problem, cfg, init)
               : cot::greedy_solve(problem, cfg, init);
  }
  if (opt.algorithm == "sns") {
    if (!(opt.eta > 0.0)) throw cot::InvalidInput("--eta is required");
    cot::SnsConfig cfg;
    cfg.n1 = opt.n1;
    cfg.n2 = opt.n2;
    cfg.nnz_budget = opt.nnz_budget;
    cfg.tol_grad_l1 = opt.tol;
    cfg.record_metrics = record_metrics;
    return cot::sns_solve(problem, cfg, opt.eta,
                          cot::zero_duals(problem, opt.eta));
  }
  if (opt.algorithm == "scheduled") {
    if (!(opt.eta_target >= 1.0)) {
      throw cot::InvalidInput("--eta-target (>= 1) is required");
    }
    cot::ScheduleConfig schedule;
    schedule.base.n1 = opt.n1;
    schedule.base.n2 = opt.n2;
    schedule.base.nnz_budget = opt.nnz_budget;
    schedule.base.record_metrics = record_metrics;
    schedule.final_tol = opt.tol;
    return cot::scheduled_solve(problem, opt.eta_target, schedule);
  }
  throw cot::InvalidInput("unknown algorithm: " + opt.algorithm);
}

int exit_code_for(cot::SolveStatus status) {
  switch (status) {
    case cot::SolveStatus::kConverged:
      return 0;
    case cot::SolveStatus::kMaxIterReached:
      return 2;
    case cot::SolveStatus::kNumericalFailure:
      return 1;
  }
  return 1;
}

int run_solve(const SolveOptions& opt) {
  const cot::ConstrainedOtProblem problem = cot::load_instance(opt.instance_path);
  log_info("solving " + opt.instance_path + " with " + opt.algorithm);
  const bool record = !opt.trace_path.empty();
  const cot::SolveReport report = dispatch_solve(problem, opt, record);

  double cost = std::numeric_limits<double>::quiet_NaN();
  double viol = std::numeric_limits<double>::quiet_NaN();
  try {
    const cot::PlanMatrix plan =
        cot::plan_from_duals(problem, report.final_state);
    const cot::RoundedPlan rounded =
        cot::round_to_feasible(plan.entries, problem.r, problem.c);
    cost = cot::transport_cost(rounded.plan, problem.cost);
    viol = cot::violation(rounded.plan, problem.constraints);
  } catch (const std::exception& e) {
    log_info(std::string("final plan not evaluable: ") + e.what());
  }

  if (!opt.trace_path.empty()) {
    std::ofstream trace(opt.trace_path);
    if (!trace) {
      throw cot::InvalidInput("cannot write trace file: " + opt.trace_path);
    }
    cot::write_trace_csv(trace, report);
  }
  write_file_or_stdout(
      opt.output_path,
      cot::result_json(problem, report, cost, viol, opt.emit_plan));
  return exit_code_for(report.status);
}

int run_check(const std::string& instance_path, double eta, double tol,
              int max_iter, const std::string& output_path) {
  const cot::ConstrainedOtProblem problem = cot::load_instance(instance_path);
  cot::SolverConfig greedy_cfg;
  greedy_cfg.eta = eta;
  greedy_cfg.tol_grad_l1 = tol;
  greedy_cfg.max_iter = max_iter;
  const std::vector<cot::CheckResult> results =
      cot::run_instance_checks(problem, eta, greedy_cfg);

  nlohmann::json doc;
  doc["checks"] = nlohmann::json::array();
  for (const cot::CheckResult& r : results) {
    nlohmann::json entry;
    entry["name"] = r.name;
    entry["measured"] = r.measured;
    entry["bound"] = r.bound;
    entry["status"] = r.status == cot::CheckStatus::kPass
                          ? "pass"
                          : (r.status == cot::CheckStatus::kFail ? "fail"
                                                                 : "skipped");
    if (!r.detail.empty()) entry["detail"] = r.detail;
    doc["checks"].push_back(entry);
  }
  const bool ok = cot::all_checks_pass(results);
  doc["status"] = ok ? "pass" : "fail";
  write_file_or_stdout(output_path, doc.dump(2));
  return ok ? 0 : 1;
}

struct ExperimentOptions {
  std::string kind = "random-assignment";
  int n = 50;
  std::uint64_t seed = 0;
  double eta = 0.0;
  std::optional<double> t_ineq;
  std::optional<double> t_eq;
  std::string algorithm = "sinkhorn";
  double tol = 1e-6;
  int max_iter = 10000;
  int n1 = 20;
  int n2 = 30;
  int nnz_budget = 0;
  std::string trace_path;
  std::string save_instance_path;
};

int run_experiment(const ExperimentOptions& opt) {
  cot::ConstrainedOtProblem problem =
      opt.kind == "ranking"
          ? cot::gen_ranking_dcg(opt.n, opt.seed, opt.t_ineq, opt.t_eq)
          : cot::gen_random_assignment(opt.n, opt.seed,
                                       opt.t_ineq.value_or(0.5),
                                       opt.t_eq.value_or(0.5));
  if (opt.kind != "ranking" && opt.kind != "random-assignment") {
    throw cot::InvalidInput("unknown experiment kind: " + opt.kind);
  }
  if (!opt.save_instance_path.empty()) {
    cot::save_instance(problem, opt.save_instance_path);
  }

  SolveOptions solve_opt;
  solve_opt.algorithm = opt.algorithm;
  solve_opt.eta = opt.eta;
  solve_opt.eta_target = opt.eta;
  solve_opt.tol = opt.tol;
  solve_opt.max_iter = opt.max_iter;
  solve_opt.n1 = opt.n1;
  solve_opt.n2 = opt.n2;
  solve_opt.nnz_budget = opt.nnz_budget;
  const cot::SolveReport report = dispatch_solve(problem, solve_opt, true);

  if (!opt.trace_path.empty()) {
    std::ofstream trace(opt.trace_path);
    if (!trace) {
      throw cot::InvalidInput("cannot write trace file: " + opt.trace_path);
    }
    cot::write_trace_csv(trace, report);
  }

  const cot::PlanMatrix plan = cot::plan_from_duals(problem, report.final_state);
  const cot::RoundedPlan rounded =
      cot::round_to_feasible(plan.entries, problem.r, problem.c);
  const double cost = cot::transport_cost(rounded.plan, problem.cost);
  const double viol = cot::violation(rounded.plan, problem.constraints);
  std::printf("kind=%s n=%d seed=%llu status=%s iterations=%d cost=%.12g "
              "score=%.12g violation=%.12g\n",
              opt.kind.c_str(), opt.n,
              static_cast<unsigned long long>(opt.seed),
              cot::status_name(report.status).c_str(), report.iterations,
              cost, -cost, viol);
  return exit_code_for(report.status);
}

struct ParetoOptions {
  int n = 30;
  std::uint64_t seed = 0;
  std::string src_image;
  std::string dst_image;
  std::vector<double> etas = {10.0, 100.0, 1000.0};
  std::vector<double> t_grid;
  int t_points = 5;
  double eta_ref = 10000.0;
  int stage_n1 = 5;
  int stage_n2 = 5;
  int jobs = 1;
  std::string output_path;
};

int run_pareto(const ParetoOptions& opt) {
  cot::PointCloud src, dst;
  if (!opt.src_image.empty() || !opt.dst_image.empty()) {
    if (opt.src_image.empty() || opt.dst_image.empty()) {
      throw cot::InvalidInput("both --src-image and --dst-image are needed");
    }
    src = cot::load_grayscale_csv(opt.src_image);
    dst = cot::load_grayscale_csv(opt.dst_image);
    if (src.points.rows() != dst.points.rows()) {
      throw cot::InvalidInput(
          "image clouds differ in size; crop to equal pixel counts");
    }
  } else {
    src = cot::gen_random_point_cloud(opt.n, cot::sub_seed(opt.seed, 10));
    dst = cot::gen_random_point_cloud(opt.n, cot::sub_seed(opt.seed, 11));
  }

  cot::ScheduleConfig schedule;
  schedule.stage_n1 = opt.stage_n1;
  schedule.stage_n2 = opt.stage_n2;

  std::vector<double> grid = opt.t_grid;
  if (grid.empty()) {
    const auto [t_min, t_max] =
        cot::pareto_t_range(src, dst, opt.eta_ref, schedule);
    log_info("t range: [" + std::to_string(t_min) + ", " +
             std::to_string(t_max) + "]");
    if (opt.t_points < 2) throw cot::InvalidInput("--t-points must be >= 2");
    for (int i = 0; i < opt.t_points; ++i) {
      grid.push_back(t_min + (t_max - t_min) * i / (opt.t_points - 1));
    }
  }

  const std::vector<cot::ParetoPoint> points =
      cot::pareto_sweep(src, dst, grid, opt.etas, schedule, opt.jobs);

  if (opt.output_path.empty()) {
    cot::write_pareto_csv(std::cout, points);
  } else {
    std::ofstream out(opt.output_path);
    if (!out) {
      throw cot::InvalidInput("cannot write output file: " + opt.output_path);
    }
    cot::write_pareto_csv(out, points);
  }

  int converged = 0;
  for (const cot::ParetoPoint& point : points) converged += point.converged;
  std::printf("pareto points=%zu converged=%d\n", points.size(), converged);
  return converged > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropic solver for optimal transport with extra linear "
               "equality and inequality constraints"};
  app.require_subcommand(1);

  SolveOptions solve_opt;
  CLI::App* solve = app.add_subcommand("solve", "Solve an instance file");
  solve->add_option("--instance", solve_opt.instance_path, "Instance JSON")
      ->required();
  solve->add_option("--algorithm", solve_opt.algorithm,
                    "sinkhorn|greedy|sns|scheduled");
  solve->add_option("--eta", solve_opt.eta, "Regularization strength");
  solve->add_option("--eta-target", solve_opt.eta_target,
                    "Target eta for the scheduled algorithm");
  solve->add_option("--tol", solve_opt.tol, "Gradient L1 tolerance");
  solve->add_option("--max-iter", solve_opt.max_iter, "Iteration cap");
  solve->add_option("--n1", solve_opt.n1, "Sinkhorn warm-start iterations");
  solve->add_option("--n2", solve_opt.n2, "Newton iterations");
  solve->add_option("--nnz-budget", solve_opt.nnz_budget,
                    "Retained plan entries in the sparse Hessian (0: 5n)");
  solve->add_option("--output", solve_opt.output_path, "Result JSON path");
  solve->add_option("--trace", solve_opt.trace_path, "Trace CSV path");
  solve->add_flag("--emit-plan", solve_opt.emit_plan,
                  "Include the final plan in the result JSON");

  std::string check_instance;
  double check_eta = 0.0;
  double check_tol = 1e-4;
  int check_max_iter = 20000;
  std::string check_output;
  CLI::App* check = app.add_subcommand("check", "Run the verification suite");
  check->add_option("--instance", check_instance, "Instance JSON")->required();
  check->add_option("--eta", check_eta, "Regularization strength")->required();
  check->add_option("--tol", check_tol, "Greedy tolerance for the bound check");
  check->add_option("--max-iter", check_max_iter, "Greedy iteration cap");
  check->add_option("--output", check_output, "Report JSON path");

  ExperimentOptions exp_opt;
  double exp_t_ineq = std::numeric_limits<double>::quiet_NaN();
  double exp_t_eq = std::numeric_limits<double>::quiet_NaN();
  CLI::App* experiment =
      app.add_subcommand("experiment", "Run a generated experiment instance");
  experiment->add_option("--kind", exp_opt.kind, "random-assignment|ranking");
  experiment->add_option("--n", exp_opt.n, "Instance size")->required();
  experiment->add_option("--seed", exp_opt.seed, "Generator seed");
  experiment->add_option("--eta", exp_opt.eta, "Regularization strength")
      ->required();
  experiment->add_option("--t-ineq", exp_t_ineq, "Inequality threshold");
  experiment->add_option("--t-eq", exp_t_eq, "Equality threshold");
  experiment->add_option("--algorithm", exp_opt.algorithm,
                         "sinkhorn|greedy|sns|scheduled");
  experiment->add_option("--tol", exp_opt.tol, "Gradient L1 tolerance");
  experiment->add_option("--max-iter", exp_opt.max_iter, "Iteration cap");
  experiment->add_option("--n1", exp_opt.n1, "Sinkhorn warm-start iterations");
  experiment->add_option("--n2", exp_opt.n2, "Newton iterations");
  experiment->add_option("--nnz-budget", exp_opt.nnz_budget,
                         "Retained plan entries in the sparse Hessian (0: 5n)");
  experiment->add_option("--trace", exp_opt.trace_path, "Trace CSV path");
  experiment->add_option("--save-instance", exp_opt.save_instance_path,
                         "Write the generated instance JSON");

  ParetoOptions pareto_opt;
  CLI::App* pareto =
      app.add_subcommand("pareto", "Sweep the Euclidean-budget Pareto front");
  pareto->add_option("--n", pareto_opt.n, "Points per cloud");
  pareto->add_option("--seed", pareto_opt.seed, "Cloud seed");
  pareto->add_option("--src-image", pareto_opt.src_image,
                     "Grayscale CSV for the source cloud");
  pareto->add_option("--dst-image", pareto_opt.dst_image,
                     "Grayscale CSV for the target cloud");
  pareto->add_option("--etas", pareto_opt.etas, "Regularization strengths")
      ->delimiter(',');
  pareto->add_option("--t-grid", pareto_opt.t_grid, "Explicit budget grid")
      ->delimiter(',');
  pareto->add_option("--t-points", pareto_opt.t_points,
                     "Grid size when --t-grid is absent");
  pareto->add_option("--eta-ref", pareto_opt.eta_ref,
                     "Eta used to compute the t range");
  pareto->add_option("--stage-n1", pareto_opt.stage_n1, "Per-stage n1");
  pareto->add_option("--stage-n2", pareto_opt.stage_n2, "Per-stage n2");
  pareto->add_option("--jobs", pareto_opt.jobs, "Worker pool size");
  pareto->add_option("--output", pareto_opt.output_path, "Sweep CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return run_solve(solve_opt);
    if (*check) {
      return run_check(check_instance, check_eta, check_tol, check_max_iter,
                       check_output);
    }
    if (*experiment) {
      if (!std::isnan(exp_t_ineq)) exp_opt.t_ineq = exp_t_ineq;
      if (!std::isnan(exp_t_eq)) exp_opt.t_eq = exp_t_eq;
      return run_experiment(exp_opt);
    }
    if (*pareto) return run_pareto(pareto_opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
