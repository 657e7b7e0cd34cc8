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

#include "cot/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace cot {

namespace {

constexpr double kMarginalSumTol = 1e-6;

bool is_finite(const Matrix& m) { return m.allFinite(); }
bool is_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

DualState zero_duals(const ConstrainedOtProblem& p, double eta) {
  if (!(eta > 0.0)) throw InvalidInput("eta must be positive");
  DualState s;
  s.x = Vector::Zero(p.n);
  s.y = Vector::Zero(p.n);
  s.a = Vector::Zero(p.num_constraints());
  s.eta = eta;
  return s;
}

Constraint homogenize_constraint(const Matrix& d, double threshold,
                                 ThresholdSense sense) {
  if (!is_finite(d) || !std::isfinite(threshold)) {
    throw InvalidInput("homogenize_constraint: non-finite entries");
  }
  const Matrix shift =
      Matrix::Constant(d.rows(), d.cols(), threshold);
  switch (sense) {
    case ThresholdSense::kGeThreshold:
      return Constraint{d - shift, ConstraintKind::kInequalityGe};
    case ThresholdSense::kLeThreshold:
      return Constraint{shift - d, ConstraintKind::kInequalityGe};
    case ThresholdSense::kEqThreshold:
      return Constraint{d - shift, ConstraintKind::kEquality};
  }
  throw InvalidInput("homogenize_constraint: unknown sense");
}

ValidationResult validate_problem(const ConstrainedOtProblem& p) {
  ValidationResult result;
  auto fail = [&result](std::string msg) {
    result.ok = false;
    result.error = std::move(msg);
    return result;
  };

  if (p.n < 1) return fail("n must be a positive integer");
  if (p.cost.rows() != p.n || p.cost.cols() != p.n) {
    return fail("cost matrix dimensions do not match n");
  }
  if (p.r.size() != p.n || p.c.size() != p.n) {
    return fail("marginal lengths do not match n");
  }
  if (!is_finite(p.cost)) return fail("cost matrix has non-finite entries");
  if (!is_finite(p.r) || !is_finite(p.c)) {
    return fail("marginals have non-finite entries");
  }
  if ((p.r.array() < 0.0).any() || (p.c.array() < 0.0).any()) {
    return fail("marginals have negative entries");
  }
  if (std::abs(p.r.sum() - 1.0) > 1e-12 || std::abs(p.c.sum() - 1.0) > 1e-12) {
    return fail("marginals do not sum to 1");
  }
  if (p.k_ineq < 0 || p.l_eq < 0 ||
      p.k_ineq + p.l_eq != static_cast<int>(p.constraints.size())) {
    return fail("k_ineq + l_eq does not match the constraint count");
  }
  for (int m = 0; m < static_cast<int>(p.constraints.size()); ++m) {
    const Constraint& d = p.constraints[m];
    if (d.matrix.rows() != p.n || d.matrix.cols() != p.n) {
      return fail("constraint " + std::to_string(m) +
                  ": dimension mismatch with cost matrix");
    }
    if (!is_finite(d.matrix)) {
      return fail("constraint " + std::to_string(m) +
                  ": non-finite entries");
    }
    const bool should_be_ineq = m < p.k_ineq;
    if (should_be_ineq != (d.kind == ConstraintKind::kInequalityGe)) {
      return fail("constraints are not ordered inequalities-first");
    }
  }

  result.ok = true;
  result.has_zero_marginals =
      (p.r.array() == 0.0).any() || (p.c.array() == 0.0).any();
  return result;
}

ConstrainedOtProblem make_problem(Matrix cost, Vector r, Vector c,
                                  std::vector<Constraint> constraints) {
  ConstrainedOtProblem p;
  p.n = static_cast<int>(cost.rows());
  p.cost = std::move(cost);

  if (!is_finite(r) || !is_finite(c)) {
    throw InvalidInput("marginals have non-finite entries");
  }
  const double rsum = r.sum();
  const double csum = c.sum();
  if (std::abs(rsum - 1.0) > kMarginalSumTol ||
      std::abs(csum - 1.0) > kMarginalSumTol) {
    std::ostringstream msg;
    msg << "marginal sums must be within " << kMarginalSumTol
        << " of 1 (got r: " << rsum << ", c: " << csum << ")";
    throw InvalidInput(msg.str());
  }
  // Keep already-normalized marginals bit-exact (file round trips).
  p.r = std::abs(rsum - 1.0) <= 1e-15 ? std::move(r) : Vector(r / rsum);
  p.c = std::abs(csum - 1.0) <= 1e-15 ? std::move(c) : Vector(c / csum);

  // Inequalities first; relative order within each kind is preserved.
  for (auto& d : constraints) {
    if (d.kind == ConstraintKind::kInequalityGe) {
      p.constraints.push_back(std::move(d));
    }
  }
  p.k_ineq = static_cast<int>(p.constraints.size());
  for (auto& d : constraints) {
    if (d.kind == ConstraintKind::kEquality) {
      p.constraints.push_back(std::move(d));
    }
  }
  p.l_eq = static_cast<int>(p.constraints.size()) - p.k_ineq;

  ValidationResult check = validate_problem(p);
  if (!check.ok) throw InvalidInput(check.error);
  return p;
}

namespace {

using nlohmann::json;

Vector field_to_vector(const json& doc, const std::string& field,
                       int expected_size) {
  if (!doc.contains(field)) {
    throw InvalidInput("instance field '" + field + "': missing");
  }
  const json& node = doc.at(field);
  if (!node.is_array() || static_cast<int>(node.size()) != expected_size) {
    throw InvalidInput("instance field '" + field + "': expected " +
                       std::to_string(expected_size) + " reals");
  }
  Vector v(expected_size);
  for (int i = 0; i < expected_size; ++i) {
    if (!node[i].is_number()) {
      throw InvalidInput("instance field '" + field + "': non-numeric entry");
    }
    v[i] = node[i].get<double>();
  }
  return v;
}

Matrix field_to_matrix(const json& doc, const std::string& field, int n) {
  Vector flat = field_to_vector(doc, field, n * n);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = flat[i * n + j];
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

}  // namespace

ConstrainedOtProblem parse_instance(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("instance JSON parse error: ") + e.what());
  }
  if (!doc.contains("n") || !doc.at("n").is_number_integer()) {
    throw InvalidInput("instance field 'n': missing or not an integer");
  }
  const int n = doc.at("n").get<int>();
  if (n < 1) throw InvalidInput("instance field 'n': must be positive");

  Matrix cost = field_to_matrix(doc, "cost", n);
  Vector r = field_to_vector(doc, "r", n);
  Vector c = field_to_vector(doc, "c", n);

  std::vector<Constraint> constraints;
  if (doc.contains("constraints")) {
    const json& list = doc.at("constraints");
    if (!list.is_array()) {
      throw InvalidInput("instance field 'constraints': expected an array");
    }
    for (std::size_t m = 0; m < list.size(); ++m) {
      const json& entry = list[m];
      const std::string where = "constraints[" + std::to_string(m) + "]";
      if (!entry.is_object()) {
        throw InvalidInput("instance field '" + where + "': expected object");
      }
      Matrix d = field_to_matrix(entry, "matrix", n);
      if (!entry.contains("sense") || !entry.at("sense").is_string()) {
        throw InvalidInput("instance field '" + where + ".sense': missing");
      }
      const std::string sense = entry.at("sense").get<std::string>();
      double threshold = 0.0;
      if (entry.contains("threshold")) {
        if (!entry.at("threshold").is_number()) {
          throw InvalidInput("instance field '" + where +
                             ".threshold': non-numeric");
        }
        threshold = entry.at("threshold").get<double>();
      }
      ThresholdSense parsed;
      if (sense == "ge") {
        parsed = ThresholdSense::kGeThreshold;
      } else if (sense == "le") {
        parsed = ThresholdSense::kLeThreshold;
      } else if (sense == "eq") {
        parsed = ThresholdSense::kEqThreshold;
      } else {
        throw InvalidInput("instance field '" + where +
                           ".sense': expected \"ge\", \"le\" or \"eq\"");
      }
      constraints.push_back(homogenize_constraint(d, threshold, parsed));
    }
  }

  return make_problem(std::move(cost), std::move(r), std::move(c),
                      std::move(constraints));
}

ConstrainedOtProblem load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open instance file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_instance(buffer.str());
}

void save_instance(const ConstrainedOtProblem& p, const std::string& path) {
  json doc;
  doc["n"] = p.n;
  doc["cost"] = matrix_to_json(p.cost);
  doc["r"] = json::array();
  doc["c"] = json::array();
  for (int i = 0; i < p.n; ++i) doc["r"].push_back(p.r[i]);
  for (int j = 0; j < p.n; ++j) doc["c"].push_back(p.c[j]);
  doc["constraints"] = json::array();
  for (const Constraint& d : p.constraints) {
    json entry;
    entry["matrix"] = matrix_to_json(d.matrix);
    entry["sense"] = d.kind == ConstraintKind::kInequalityGe ? "ge" : "eq";
    entry["threshold"] = 0.0;
    doc["constraints"].push_back(entry);
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write instance file: " + path);
  out << doc.dump(2) << "\n";
}

}  // namespace cot
