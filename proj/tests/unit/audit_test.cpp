#include "polysafe/audit.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "certificates.hpp"
#include "polysafe/error.hpp"
#include "polysafe/parser.hpp"

namespace polysafe {
namespace {

using fixtures::LinearHandCertificate;
using fixtures::PublishedHs;
using fixtures::PublishedV;

const std::string kDataDir = POLYSAFE_DATA_DIR;

GTEST_TEST(AuditTest, HandCertificateIsExact) {
  const SafetyProblem prob = load_problem(kDataDir + "/linear_attack_free.json");
  const Certificate cert = LinearHandCertificate(prob);
  const auto polys = condition_polynomials(prob, cert);
  EXPECT_TRUE(polys.at("cond1").is_zero());
  EXPECT_EQ(polys.at("cond2"), Polynomial(1.0));
  EXPECT_EQ(polys.at("cond3"), 2.0 * Polynomial(prob.state_vars[0]).pow(2));

  const AuditReport report = audit(prob, cert);
  EXPECT_TRUE(report.passed);
  for (const auto& c : report.conditions) {
    EXPECT_TRUE(c.passed) << c.name;
    EXPECT_EQ(c.reconstruction_defect, 0.0) << c.name;
  }
  ASSERT_NE(report.find("epsilon"), nullptr);
  EXPECT_EQ(report.find("missing"), nullptr);
}

GTEST_TEST(AuditTest, PositiveEpsilonFails) {
  const SafetyProblem prob = load_problem(kDataDir + "/linear_attack_free.json");
  Certificate cert = LinearHandCertificate(prob);
  cert.epsilon = 0.5;
  cert.grams["cond3"] = fixtures::Gram({Monomial(), Monomial(prob.state_vars[0])},
                                       Eigen::Vector2d(0.5, 2.0).asDiagonal());
  const AuditReport report = audit(prob, cert);
  EXPECT_TRUE(report.find("cond3")->passed);
  EXPECT_FALSE(report.find("epsilon")->passed);
  EXPECT_FALSE(report.passed);
}

GTEST_TEST(AuditTest, NegativeGramFails) {
  const SafetyProblem prob = load_problem(kDataDir + "/linear_attack_free.json");
  Certificate cert = LinearHandCertificate(prob);
  const Variable x = prob.state_vars[0];
  cert.lambda1 = Polynomial(1.0) - Polynomial(x).pow(2);
  cert.grams["lambda1"] = fixtures::Gram({Monomial(), Monomial(x)},
                                         Eigen::Vector2d(1.0, -1.0).asDiagonal());
  const AuditReport report = audit(prob, cert);
  const ConditionRecord* l1 = report.find("lambda1");
  ASSERT_NE(l1, nullptr);
  EXPECT_EQ(l1->reconstruction_defect, 0.0);
  EXPECT_NEAR(l1->min_eigenvalue, -1.0, 1e-12);
  EXPECT_LT(l1->worst_sample, 0.0);
  EXPECT_FALSE(l1->passed);
  EXPECT_FALSE(report.passed);
}

GTEST_TEST(AuditTest, MissingMembers) {
  const SafetyProblem prob = load_problem(kDataDir + "/linear_attack_free.json");
  Certificate cert = LinearHandCertificate(prob);
  cert.grams.erase("cond2");
  cert.grams.erase("lambda4");
  try {
    audit(prob, cert);
    FAIL();
  } catch (const IncompleteCertificateError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("cond2"), std::string::npos);
    EXPECT_NE(what.find("lambda4"), std::string::npos);
  }
  cert = LinearHandCertificate(prob);
  cert.P = Eigen::MatrixXd::Identity(1, 1);
  EXPECT_THROW(audit(prob, cert), IncompleteCertificateError);
}

GTEST_TEST(AuditTest, PublishedCertificateAndTampering) {
  const SafetyProblem prob = load_problem(kDataDir + "/two_state.json");
  const PhaseResult done =
      complete_certificate(prob, DegreeConfig{}, PublishedV(prob), PublishedHs(prob), 0.0);
  ASSERT_TRUE(done.usable);
  const Certificate& cert = done.certificate;
  EXPECT_LE(cert.epsilon, 0.0);
  const AuditReport report = audit(prob, cert);
  for (const auto& c : report.conditions) EXPECT_TRUE(c.passed) << c.name;
  EXPECT_TRUE(report.passed);

  Certificate tampered = cert;
  tampered.V = parse_poly("0.8881*x1^2 + 0.1*x2^2", prob.state_vars);
  const AuditReport bad = audit(prob, tampered);
  EXPECT_FALSE(bad.passed);
  const ConditionRecord* c1 = bad.find("cond1");
  ASSERT_NE(c1, nullptr);
  EXPECT_FALSE(c1->passed);
  EXPECT_LT(c1->worst_sample, 0.0);

  // {V <= 1} reaches past the safe boundary along x2.
  const auto witness =
      sample_containment(Polynomial(1.0) - tampered.V, prob.safe_set, prob.state_vars,
                         state_sampling_box(prob), 10000, 1);
  ASSERT_TRUE(witness.has_value());
  EXPECT_GT(std::abs(witness->point(1)), 1.1);
  EXPECT_FALSE(sample_containment(Polynomial(1.0) - cert.V, prob.safe_set,
                                  prob.state_vars, state_sampling_box(prob), 10000, 1)
                   .has_value());
}

GTEST_TEST(AuditTest, Deterministic) {
  const SafetyProblem prob = load_problem(kDataDir + "/linear_attack_free.json");
  Certificate cert = LinearHandCertificate(prob);
  cert.lambda2 = Polynomial(0.5);
  EXPECT_EQ(audit_report_json(audit(prob, cert, {}, 500, 3)),
            audit_report_json(audit(prob, cert, {}, 500, 3)));
}

GTEST_TEST(SampleContainmentTest, Intervals) {
  const Variables x{Variable("x", VarKind::kState)};
  Box box;
  box.lo = Eigen::VectorXd::Constant(1, -2.0);
  box.hi = Eigen::VectorXd::Constant(1, 2.0);
  const Polynomial in1 = parse_poly("1 - x^2", x);
  const Polynomial in2 = parse_poly("2 - x^2", x);
  EXPECT_FALSE(sample_containment(in1, in2, x, box, 5000, 1).has_value());
  const auto w = sample_containment(in2, in1, x, box, 5000, 1);
  ASSERT_TRUE(w.has_value());
  EXPECT_NEAR(std::abs(w->point(0)), std::sqrt(2.0), 0.01);
  EXPECT_NEAR(w->value, -1.0, 0.03);
  const auto again = sample_containment(in2, in1, x, box, 5000, 1);
  EXPECT_EQ(again->point, w->point);
}

GTEST_TEST(SampleContainmentTest, PublishedSublevelSet) {
  const SafetyProblem prob = load_problem(kDataDir + "/two_state.json");
  Box box;
  box.lo = Eigen::Vector2d(-1.5, -1.5);
  box.hi = Eigen::Vector2d(1.5, 1.5);
  EXPECT_FALSE(sample_containment(Polynomial(1.0) - PublishedV(prob), prob.safe_set,
                                  prob.state_vars, box, 20000, 1)
                   .has_value());
}

}  // namespace
}  // namespace polysafe
