#include "polysafe/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "json.hpp"

#include "polysafe/error.hpp"

namespace polysafe {

namespace {

double coefficient_defect(const Polynomial& a, const Polynomial& b) {
  double worst = 0.0;
  for (const auto& [m, c] : a.terms()) worst = std::max(worst, std::abs(c - b.coefficient(m)));
  for (const auto& [m, c] : b.terms()) {
    if (a.coefficient(m) == 0.0) worst = std::max(worst, std::abs(c));
  }
  return worst;
}

double min_eig(const Eigen::MatrixXd& Q) {
  if (Q.size() == 0) return 0.0;
  const Eigen::MatrixXd S = 0.5 * (Q + Q.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

Box attack_box(const SafetyProblem& prob) {
  const auto k = static_cast<Eigen::Index>(prob.attack_vars.size());
  Box fallback{Eigen::VectorXd::Constant(k, -1.5), Eigen::VectorXd::Constant(k, 1.5)};
  if (k == 0) return fallback;
  std::map<Variable, Polynomial> at_origin;
  for (const Variable& x : prob.state_vars) at_origin.emplace(x, Polynomial(0.0));
  const Polynomial a0 = substitute(prob.attack_set, at_origin);
  try {
    Box b = bounding_box(a0, prob.attack_vars);
    if ((b.hi - b.lo).maxCoeff() >= 1e2) return fallback;
    return b.scaled(1.5);
  } catch (const Error&) {
    return fallback;
  }
}

}  // namespace

const ConditionRecord* AuditReport::find(const std::string& name) const {
  for (const auto& c : conditions) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::map<std::string, Polynomial> condition_polynomials(const SafetyProblem& prob,
                                                        const Certificate& cert) {
  std::map<std::string, Polynomial> out;
  const Polynomial one(1.0);
  out["cond1"] = prob.safe_set + Polynomial(cert.gamma) - cert.lambda1 * (one - cert.V);
  out["cond2"] = one - cert.V - cert.lambda2 * prob.initial_set;
  const std::vector<Polynomial> field =
      cert.h_s ? prob.closed_loop_field(*cert.h_s) : prob.f;
  Polynomial vdot;
  for (std::size_t i = 0; i < prob.state_vars.size(); ++i) {
    vdot += cert.V.differentiate(prob.state_vars[i]) * field[i];
  }
  out["cond3"] = -vdot + Polynomial(cert.epsilon) - cert.lambda3 * (cert.V - one) -
                 cert.lambda4 * prob.attack_set;
  if (cert.P) {
    Polynomial xpx;
    const Eigen::MatrixXd& P = *cert.P;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      for (Eigen::Index j = 0; j < P.cols(); ++j) {
        xpx += Polynomial(Monomial(prob.state_vars[static_cast<std::size_t>(i)]) *
                              Monomial(prob.state_vars[static_cast<std::size_t>(j)]),
                          P(i, j));
      }
    }
    out["cond4"] = one - xpx - (cert.lambda5 ? *cert.lambda5 : Polynomial()) * (one - cert.V);
  }
  out["lambda1"] = cert.lambda1;
  out["lambda2"] = cert.lambda2;
  out["lambda4"] = cert.lambda4;
  if (cert.lambda5) out["lambda5"] = *cert.lambda5;
  return out;
}

Box state_sampling_box(const SafetyProblem& prob) {
  return bounding_box(prob.safe_set, prob.state_vars).scaled(1.5);
}

AuditReport audit(const SafetyProblem& prob, const Certificate& cert,
                  const AuditTolerances& tol, int samples, std::uint64_t seed) {
  std::vector<std::string> required{"cond1", "cond2", "cond3", "lambda1", "lambda2", "lambda4"};
  std::vector<std::string> missing;
  if (cert.P) {
    required.emplace_back("cond4");
    required.emplace_back("lambda5");
    if (!cert.lambda5) missing.emplace_back("lambda5 polynomial");
  }
  if (cert.V.is_zero()) missing.emplace_back("V");
  if (cert.h_s && cert.h_s->size() != prob.num_inputs()) missing.emplace_back("h_s (one per input)");
  for (const auto& name : required) {
    if (!cert.grams.count(name)) missing.push_back(name + " Gram matrix");
  }
  if (!missing.empty()) {
    std::string msg = "incomplete certificate, missing:";
    for (const auto& m : missing) msg += " " + m + ";";
    msg.pop_back();
    throw IncompleteCertificateError(msg);
  }

  const auto polys = condition_polynomials(prob, cert);
  const Variables xa = prob.all_vars();
  const Box sbox = state_sampling_box(prob);
  const Box abox = attack_box(prob);
  const auto n = sbox.dim();
  const auto k = abox.dim();
  Box box{Eigen::VectorXd(n + k), Eigen::VectorXd(n + k)};
  box.lo << sbox.lo, abox.lo;
  box.hi << sbox.hi, abox.hi;
  std::mt19937_64 rng(seed);
  const std::vector<Eigen::VectorXd> points = sample_box(box, samples, rng);

  AuditReport report;
  report.passed = true;
  for (const auto& name : required) {
    const Polynomial& p = polys.at(name);
    const GramDecomposition& g = cert.grams.at(name);
    ConditionRecord rec;
    rec.name = name;
    rec.reconstruction_defect = coefficient_defect(p, gram_polynomial(g.basis, g.Q));
    rec.min_eigenvalue = min_eig(g.Q);
    const CompiledPolynomial cp(p, xa);
    rec.worst_sample = std::numeric_limits<double>::infinity();
    for (const auto& pt : points) {
      const double v = cp(std::span<const double>(pt.data(), static_cast<std::size_t>(pt.size())));
      if (v < rec.worst_sample) {
        rec.worst_sample = v;
        rec.worst_point = pt;
      }
    }
    if (points.empty()) rec.worst_sample = 0.0;
    rec.passed = rec.reconstruction_defect <= tol.recon && rec.min_eigenvalue >= -tol.eig &&
                 rec.worst_sample >= -tol.sample;
    report.passed = report.passed && rec.passed;
    report.conditions.push_back(std::move(rec));
  }
  ConditionRecord eps;
  eps.name = "epsilon";
  eps.worst_sample = -cert.epsilon;
  eps.passed = cert.epsilon <= 0.0;
  report.passed = report.passed && eps.passed;
  report.conditions.push_back(std::move(eps));
  return report;
}

std::string audit_report_json(const AuditReport& report, int indent) {
  nlohmann::ordered_json doc;
  doc["verdict"] = report.passed ? "pass" : "fail";
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : report.conditions) {
    nlohmann::ordered_json r;
    r["condition"] = c.name;
    r["reconstruction_defect"] = c.reconstruction_defect;
    r["min_eigenvalue"] = c.min_eigenvalue;
    r["worst_sample"] = c.worst_sample;
    auto pt = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < c.worst_point.size(); ++i) pt.push_back(c.worst_point(i));
    r["worst_point"] = pt;
    r["pass"] = c.passed;
    arr.push_back(std::move(r));
  }
  doc["conditions"] = arr;
  return doc.dump(indent);
}

std::optional<ContainmentWitness> sample_containment(const Polynomial& A, const Polynomial& B,
                                                     const Variables& vars, const Box& box,
                                                     int n, std::uint64_t seed) {
  const CompiledPolynomial ca(A, vars);
  const CompiledPolynomial cb(B, vars);
  std::mt19937_64 rng(seed);
  std::optional<ContainmentWitness> worst;
  for (const auto& pt : sample_box(box, n, rng)) {
    const std::span<const double> v(pt.data(), static_cast<std::size_t>(pt.size()));
    if (ca(v) < 0.0) continue;
    const double b = cb(v);
    if (b < 0.0 && (!worst || b < worst->value)) worst = ContainmentWitness{pt, b};
  }
  return worst;
}

}  // namespace polysafe
