#pragma once

// Hand-built and published certificates shared by the unit and acceptance
// tests.

#include <string>
#include <vector>

#include <Eigen/Core>

#include "polysafe/parser.hpp"
#include "polysafe/problem.hpp"
#include "polysafe/safety.hpp"

namespace polysafe::fixtures {

inline GramDecomposition Gram(std::vector<Monomial> basis, Eigen::MatrixXd Q) {
  GramDecomposition g;
  g.basis = std::move(basis);
  g.Q = std::move(Q);
  return g;
}

inline Eigen::MatrixXd Scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

// V = x^2, lambda1 = lambda2 = 1, lambda3 = lambda4 = 0 for xdot = -x,
// s = 1 - x^2, T = -x^2 and no attacks. The conditions are 0, 1 and 2 x^2.
inline Certificate LinearHandCertificate(const SafetyProblem& prob) {
  const Variable x = prob.state_vars.at(0);
  Certificate cert;
  cert.state_vars = prob.state_vars;
  cert.attack_vars = prob.attack_vars;
  cert.V = Polynomial(x).pow(2);
  cert.lambda1 = Polynomial(1.0);
  cert.lambda2 = Polynomial(1.0);
  cert.epsilon = 0.0;
  cert.grams["cond1"] = Gram({Monomial()}, Scalar(0.0));
  cert.grams["cond2"] = Gram({Monomial()}, Scalar(1.0));
  cert.grams["cond3"] = Gram({Monomial(x)}, Scalar(2.0));
  cert.grams["lambda1"] = Gram({Monomial()}, Scalar(1.0));
  cert.grams["lambda2"] = Gram({Monomial()}, Scalar(1.0));
  cert.grams["lambda4"] = Gram({Monomial()}, Scalar(0.0));
  return cert;
}

// Published quadratic certificate and secondary controller for the
// two-state example.
inline Polynomial PublishedV(const SafetyProblem& prob) {
  return parse_poly("0.8881*x1^2 + 2.669*x2^2", prob.state_vars);
}

inline std::vector<Polynomial> PublishedHs(const SafetyProblem& prob) {
  const Variable xs = prob.measurement_vars.at(0);
  const Polynomial p(xs);
  return {-0.31761 * p.pow(3) - 1.2534 * p};
}

}  // namespace polysafe::fixtures
