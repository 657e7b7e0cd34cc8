#include <cstdio>
#include <filesystem>

#include "doctest.h"

#include "cot/model.hpp"
#include "cot/rng.hpp"
#include "test_support.hpp"

using cot::Matrix;
using cot::Vector;

TEST_CASE("homogenize: ge with zero threshold is the identity") {
  Matrix d(2, 2);
  d << 1.0, -2.0, 0.25, 3.0;
  const cot::Constraint h =
      cot::homogenize_constraint(d, 0.0, cot::ThresholdSense::kGeThreshold);
  CHECK(h.kind == cot::ConstraintKind::kInequalityGe);
  CHECK((h.matrix - d).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("homogenize: all-ones equality at threshold one vanishes") {
  const Matrix d = Matrix::Ones(2, 2);
  const cot::Constraint h =
      cot::homogenize_constraint(d, 1.0, cot::ThresholdSense::kEqThreshold);
  CHECK(h.kind == cot::ConstraintKind::kEquality);
  CHECK(h.matrix.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("homogenize: le flips sign around the threshold") {
  Matrix d(2, 2);
  d << 1.0, 0.0, 0.0, 1.0;
  const cot::Constraint h =
      cot::homogenize_constraint(d, 0.5, cot::ThresholdSense::kLeThreshold);
  Matrix expected(2, 2);
  expected << -0.5, 0.5, 0.5, -0.5;
  CHECK(h.kind == cot::ConstraintKind::kInequalityGe);
  CHECK((h.matrix - expected).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("homogenize: idempotent at zero threshold") {
  Matrix d(3, 3);
  d.setRandom();
  for (auto sense :
       {cot::ThresholdSense::kGeThreshold, cot::ThresholdSense::kEqThreshold}) {
    const cot::Constraint once = cot::homogenize_constraint(d, 0.0, sense);
    const cot::Constraint twice =
        cot::homogenize_constraint(once.matrix, 0.0, sense);
    CHECK((once.matrix - twice.matrix).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("homogenize: threshold form equivalent on the simplex") {
  cot::SplitMix64 rng(99);
  const int n = 4;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix d(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d(i, j) = 2.0 * rng.uniform01() - 1.0;
    }
    Matrix plan(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) plan(i, j) = rng.uniform01();
    }
    plan /= plan.sum();  // unit total mass
    const double t = 2.0 * rng.uniform01() - 1.0;
    const double raw = (d.array() * plan.array()).sum();

    const cot::Constraint ge =
        cot::homogenize_constraint(d, t, cot::ThresholdSense::kGeThreshold);
    const double hom = (ge.matrix.array() * plan.array()).sum();
    CHECK(hom == doctest::Approx(raw - t).epsilon(1e-12));
    CHECK((raw >= t) == (hom >= -1e-12));

    const cot::Constraint le =
        cot::homogenize_constraint(d, t, cot::ThresholdSense::kLeThreshold);
    const double hom_le = (le.matrix.array() * plan.array()).sum();
    CHECK(hom_le == doctest::Approx(t - raw).epsilon(1e-12));
  }
}

TEST_CASE("homogenize: non-finite input rejected") {
  Matrix d = Matrix::Ones(2, 2);
  d(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(
      cot::homogenize_constraint(d, 0.0, cot::ThresholdSense::kGeThreshold),
      cot::InvalidInput);
  CHECK_THROWS_AS(cot::homogenize_constraint(
                      Matrix::Ones(2, 2),
                      std::numeric_limits<double>::infinity(),
                      cot::ThresholdSense::kGeThreshold),
                  cot::InvalidInput);
}

TEST_CASE("validate: uniform unconstrained instance is valid") {
  const int n = 3;
  const Vector uniform = Vector::Constant(n, 1.0 / n);
  const cot::ConstrainedOtProblem p =
      cot::make_problem(Matrix::Random(n, n), uniform, uniform, {});
  const cot::ValidationResult check = cot::validate_problem(p);
  CHECK(check.ok);
  CHECK_FALSE(check.has_zero_marginals);
}

TEST_CASE("validate: marginal sum off by 0.1 is rejected") {
  Vector r(2), c(2);
  r << 0.7, 0.4;  // sums to 1.1
  c << 0.5, 0.5;
  CHECK_THROWS_AS(cot::make_problem(Matrix::Zero(2, 2), r, c, {}),
                  cot::InvalidInput);
}

TEST_CASE("validate: marginal sum within 1e-6 renormalizes exactly") {
  Vector r(2), c(2);
  r << 0.5 + 2e-7, 0.5;
  c << 0.25, 0.75;
  const cot::ConstrainedOtProblem p =
      cot::make_problem(Matrix::Zero(2, 2), r, c, {});
  CHECK(std::abs(p.r.sum() - 1.0) <= 1e-12);
  CHECK(std::abs(p.c.sum() - 1.0) <= 1e-12);
}

TEST_CASE("validate: constraint dimension mismatch is rejected") {
  const Vector uniform = Vector::Constant(2, 0.5);
  std::vector<cot::Constraint> cs;
  cs.push_back(
      cot::Constraint{Matrix::Ones(3, 3), cot::ConstraintKind::kEquality});
  CHECK_THROWS_AS(cot::make_problem(Matrix::Zero(2, 2), uniform, uniform, cs),
                  cot::InvalidInput);
}

TEST_CASE("validate: negative marginal entries rejected") {
  Vector r(2), c(2);
  r << 1.2, -0.2;
  c << 0.5, 0.5;
  CHECK_THROWS_AS(cot::make_problem(Matrix::Zero(2, 2), r, c, {}),
                  cot::InvalidInput);
}

TEST_CASE("validate: zero marginal entries flagged") {
  Vector r(2), c(2);
  r << 1.0, 0.0;
  c << 0.5, 0.5;
  const cot::ConstrainedOtProblem p =
      cot::make_problem(Matrix::Zero(2, 2), r, c, {});
  const cot::ValidationResult check = cot::validate_problem(p);
  CHECK(check.ok);
  CHECK(check.has_zero_marginals);
}

TEST_CASE("make_problem: constraints reorder inequalities-first") {
  const Vector uniform = Vector::Constant(2, 0.5);
  std::vector<cot::Constraint> cs;
  cs.push_back(
      cot::Constraint{Matrix::Ones(2, 2), cot::ConstraintKind::kEquality});
  cs.push_back(cot::Constraint{2.0 * Matrix::Ones(2, 2),
                               cot::ConstraintKind::kInequalityGe});
  const cot::ConstrainedOtProblem p =
      cot::make_problem(Matrix::Zero(2, 2), uniform, uniform, cs);
  CHECK(p.k_ineq == 1);
  CHECK(p.l_eq == 1);
  CHECK(p.constraints[0].kind == cot::ConstraintKind::kInequalityGe);
  CHECK(p.constraints[0].matrix(0, 0) == 2.0);
  CHECK(p.constraints[1].kind == cot::ConstraintKind::kEquality);
}

TEST_CASE("instance json: parse applies homogenization") {
  const std::string text = R"({
    "n": 2,
    "cost": [0.0, 1.0, 1.0, 0.0],
    "r": [0.5, 0.5],
    "c": [0.5, 0.5],
    "constraints": [
      {"matrix": [1.0, 0.0, 0.0, 1.0], "sense": "le", "threshold": 0.5}
    ]
  })";
  const cot::ConstrainedOtProblem p = cot::parse_instance(text);
  CHECK(p.n == 2);
  CHECK(p.k_ineq == 1);
  CHECK(p.constraints[0].matrix(0, 0) == doctest::Approx(-0.5));
  CHECK(p.constraints[0].matrix(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("instance json: save/load round trip is exact") {
  const cot::ConstrainedOtProblem p = cot_test::random_problem(4, 1, 1, 7);
  const std::string path =
      (std::filesystem::temp_directory_path() / "cot_roundtrip.json").string();
  cot::save_instance(p, path);
  const cot::ConstrainedOtProblem q = cot::load_instance(path);
  CHECK(q.n == p.n);
  CHECK((q.cost - p.cost).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((q.r - p.r).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((q.c - p.c).lpNorm<Eigen::Infinity>() == 0.0);
  REQUIRE(q.constraints.size() == p.constraints.size());
  for (std::size_t m = 0; m < p.constraints.size(); ++m) {
    CHECK((q.constraints[m].matrix - p.constraints[m].matrix)
              .lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(q.constraints[m].kind == p.constraints[m].kind);
  }
  std::remove(path.c_str());
}

TEST_CASE("instance json: malformed input names the offending field") {
  CHECK_THROWS_WITH_AS(cot::parse_instance(R"({"cost": []})"),
                       doctest::Contains("'n'"), cot::InvalidInput);
  CHECK_THROWS_WITH_AS(
      cot::parse_instance(R"({"n": 2, "cost": [1, 2, 3]})"),
      doctest::Contains("'cost'"), cot::InvalidInput);
  CHECK_THROWS_AS(cot::parse_instance("not json at all"), cot::InvalidInput);
}
