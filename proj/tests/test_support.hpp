#ifndef COT_TESTS_TEST_SUPPORT_HPP_
#define COT_TESTS_TEST_SUPPORT_HPP_

#include <cmath>
#include <functional>

#include "cot/lyapunov.hpp"
#include "cot/model.hpp"
#include "cot/rng.hpp"

namespace cot_test {

using cot::Matrix;
using cot::Vector;

// Random constrained instance: Unif[0,1] cost, centered Unif[-1/2,1/2]
// constraint matrices (k inequalities then l equalities), random positive
// marginals.
inline cot::ConstrainedOtProblem random_problem(int n, int k, int l,
                                                std::uint64_t seed) {
  cot::SplitMix64 rng(cot::sub_seed(seed, 42));
  Matrix cost(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) cost(i, j) = rng.uniform01();
  }
  std::vector<cot::Constraint> cs;
  for (int m = 0; m < k + l; ++m) {
    Matrix d(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) d(i, j) = rng.uniform01() - 0.5;
    }
    cs.push_back(cot::Constraint{
        d, m < k ? cot::ConstraintKind::kInequalityGe
                 : cot::ConstraintKind::kEquality});
  }
  Vector r(n), c(n);
  for (int i = 0; i < n; ++i) r[i] = 0.2 + rng.uniform01();
  for (int j = 0; j < n; ++j) c[j] = 0.2 + rng.uniform01();
  r /= r.sum();
  c /= c.sum();
  return cot::make_problem(cost, r, c, cs);
}

inline cot::DualState random_duals(const cot::ConstrainedOtProblem& p,
                                   double eta, std::uint64_t seed,
                                   double scale = 0.5) {
  cot::SplitMix64 rng(cot::sub_seed(seed, 17));
  cot::DualState s = cot::zero_duals(p, eta);
  for (int i = 0; i < p.n; ++i) {
    s.x[i] = scale * (rng.uniform01() - 0.5);
    s.y[i] = scale * (rng.uniform01() - 0.5);
  }
  for (int m = 0; m < p.num_constraints(); ++m) {
    s.a[m] = scale * (rng.uniform01() - 0.5);
  }
  return s;
}

// Central finite difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& fn,
                           double h) {
  return (fn(h) - fn(-h)) / (2.0 * h);
}

// Max relative error between grad_f and central differences of eval_f.
inline double max_gradient_fd_error(const cot::ConstrainedOtProblem& p,
                                    const cot::DualState& s,
                                    double h = 1e-6) {
  const cot::GradientVector g = cot::grad_f(p, s);
  double worst = 0.0;
  auto update = [&worst](double fd, double exact) {
    worst = std::max(worst,
                     std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
  };
  for (int i = 0; i < p.n; ++i) {
    update(central_diff(
               [&](double d) {
                 cot::DualState probe = s;
                 probe.x[i] += d;
                 return cot::eval_f(p, probe);
               },
               h),
           g.gx[i]);
    update(central_diff(
               [&](double d) {
                 cot::DualState probe = s;
                 probe.y[i] += d;
                 return cot::eval_f(p, probe);
               },
               h),
           g.gy[i]);
  }
  for (int m = 0; m < p.num_constraints(); ++m) {
    update(central_diff(
               [&](double d) {
                 cot::DualState probe = s;
                 probe.a[m] += d;
                 return cot::eval_f(p, probe);
               },
               h),
           g.ga[m]);
  }
  return worst;
}

}  // namespace cot_test

#endif  // COT_TESTS_TEST_SUPPORT_HPP_
