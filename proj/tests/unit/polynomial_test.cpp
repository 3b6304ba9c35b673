#include "polysafe/polynomial.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "polysafe/error.hpp"
#include "polysafe/parser.hpp"

namespace polysafe {
namespace {

const Variable x1("x1", VarKind::kState);
const Variable x2("x2", VarKind::kState);
const Variable a1("a1", VarKind::kAttack);
const Variable a2("a2", VarKind::kAttack);

Variables Universe() { return {x1, x2, a1, a2}; }

Polynomial P(const char* text) { return parse_poly(text, Universe()); }

// Random polynomial of degree <= max_degree over the first `n` variables of vars.
Polynomial RandomPoly(std::mt19937_64& rng, const Variables& vars, int max_degree,
                      int n_terms = 6) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vars.size()) - 1);
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  Polynomial p;
  for (int t = 0; t < n_terms; ++t) {
    Polynomial term(coef(rng));
    const int d = deg(rng);
    for (int k = 0; k < d; ++k) term *= Polynomial(vars[pick(rng)]);
    p += term;
  }
  return p;
}

double MaxCoefDiff(const Polynomial& a, const Polynomial& b) {
  return (a - b).max_abs_coefficient();
}

GTEST_TEST(PolynomialTest, MonomialInvariants) {
  const Monomial m({{x1, 2}, {x2, 1}});
  EXPECT_EQ(m.degree(), 3);
  EXPECT_EQ(m.exponent(x1), 2);
  EXPECT_EQ(m.exponent(a1), 0);
  EXPECT_EQ(Monomial({{x2, 1}, {x1, 2}}), m);
  EXPECT_EQ(Monomial({{x1, 0}, {x2, 1}}).factors().size(), 1u);
  EXPECT_TRUE(Monomial().is_constant());
  EXPECT_EQ((Monomial(x1) * Monomial(x1, 2)).exponent(x1), 3);
}

GTEST_TEST(PolynomialTest, VariableInterning) {
  EXPECT_EQ(Variable("x1", VarKind::kState), x1);
  EXPECT_FALSE(Variable("x1", VarKind::kAttack) == x1);
  EXPECT_TRUE(Variable("x2", VarKind::kState) < Variable("x10", VarKind::kState));
  EXPECT_TRUE(x2 < a1);
}

GTEST_TEST(PolynomialTest, Multiplication) {
  EXPECT_EQ(P("x1 + 1") * P("x1 - 1"), P("x1^2 - 1"));
  EXPECT_TRUE((P("x1^3 + x2") * Polynomial()).is_zero());
  const Polynomial prod = P("0.67315*x1^2") * P("x2");
  EXPECT_EQ(prod.size(), 1u);
  EXPECT_DOUBLE_EQ(prod.coefficient(Monomial({{x1, 2}, {x2, 1}})), 0.67315);
  EXPECT_EQ((P("x1 + x2") * P("x1^2 - a1")).degree(), 3);
}

GTEST_TEST(PolynomialTest, Evaluation) {
  const Polynomial s = P("1.3 - x1^2 - x2^2");
  EXPECT_DOUBLE_EQ(s.evaluate({{x1, 0.0}, {x2, 0.0}}), 1.3);
  const Polynomial p = P("3.5 + x1*x2 - 2*a1^3");
  EXPECT_DOUBLE_EQ(p.evaluate({{x1, 0.0}, {x2, 0.0}, {a1, 0.0}}), p.constant_term());
  const Polynomial V2 = P("0.8881*x1^2 + 2.669*x2^2");
  EXPECT_DOUBLE_EQ(V2.evaluate({{x1, 1.0}, {x2, 0.0}}), 0.8881);
  EXPECT_THROW(V2.evaluate({{x1, 1.0}}), MissingAssignmentError);

  const Variables xs{x1, x2};
  const std::vector<double> v{0.3, -1.7};
  EXPECT_DOUBLE_EQ(V2.evaluate(xs, v), V2.evaluate({{x1, 0.3}, {x2, -1.7}}));
  EXPECT_DOUBLE_EQ(CompiledPolynomial(V2, xs)(v), V2.evaluate(xs, v));
}

GTEST_TEST(PolynomialTest, Gradient) {
  const Variables xs{x1, x2};
  EXPECT_EQ(gradient(P("x1^2*x2"), xs)[0], P("2*x1*x2"));
  const auto g = gradient(P("0.67315*x1^2 + 0.70356*x2^2"), xs);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_TRUE(g[0].almost_equal(P("1.3463*x1"), 1e-12));
  EXPECT_TRUE(g[1].almost_equal(P("1.40712*x2"), 1e-12));
  for (const auto& c : gradient(Polynomial(1.3), xs)) EXPECT_TRUE(c.is_zero());
}

GTEST_TEST(PolynomialTest, Substitution) {
  const Variable y("y", VarKind::kState);
  EXPECT_EQ(substitute(P("x2^2"), {{x2, Polynomial(y) + 1.0}}),
            Polynomial(y) * Polynomial(y) + 2.0 * Polynomial(y) + 1.0);
  const Variable xs("xs", VarKind::kMeasurement);
  const Polynomial h = -1.2534 * Polynomial(xs);
  EXPECT_EQ(substitute(h, {{xs, Polynomial(x2)}}), P("-1.2534*x2"));
  const Polynomial p = P("4 - x1*x2 + a1^2");
  EXPECT_EQ(substitute(p, {{x1, 0.0}, {x2, 0.0}, {a1, 0.0}}), Polynomial(4.0));
  // Unbound variables are kept.
  EXPECT_EQ(substitute(p, {{a1, 0.0}}), P("4 - x1*x2"));
}

GTEST_TEST(PolynomialTest, LieDerivative) {
  const Variable x("x", VarKind::kState);
  const std::vector<Polynomial> fx{-Polynomial(x)};
  const Variables vx{x};
  EXPECT_EQ(lie_derivative(Polynomial(x).pow(2), fx, vx), -2.0 * Polynomial(x).pow(2));
  EXPECT_TRUE(lie_derivative(Polynomial(2.0), fx, vx).is_zero());

  const Variables xs{x1, x2};
  const Polynomial V1 = P("0.67315*x1^2 + 0.70356*x2^2");
  const std::vector<Polynomial> f{P("-x1 + x2 + a1"), P("-x2 - x1^2*x2 + a2")};
  const Polynomial expected =
      P("-1.3463*x1^2 + 1.3463*x1*x2 + 1.3463*x1*a1 - 1.40712*x2^2 "
        "- 1.40712*x1^2*x2^2 + 1.40712*x2*a2");
  EXPECT_TRUE(lie_derivative(V1, f, xs).almost_equal(expected, 1e-12));

  EXPECT_THROW(lie_derivative(V1, std::vector<Polynomial>{f[0]}, xs), DimensionError);
}

GTEST_TEST(PolynomialTest, ZeroDrop) {
  EXPECT_DOUBLE_EQ(zero_tolerance(), 1e-12);
  const Polynomial p = P("x1 + 1e-13*x2");
  EXPECT_EQ(p.size(), 1u);
  EXPECT_TRUE((P("x1 + x2") - P("x2 + x1")).is_zero());
  set_zero_tolerance(1e-3);
  EXPECT_EQ(P("x1 + 1e-4*x2").size(), 1u);
  set_zero_tolerance(1e-12);
  EXPECT_EQ(P("x1 + 1e-4*x2").size(), 2u);
}

GTEST_TEST(PolynomialTest, Rendering) {
  EXPECT_EQ(P("-1.2534*x2 - 0.31761*x2^3").to_string(), "-0.31761*x2^3 - 1.2534*x2");
  EXPECT_EQ(P("1.3 - x2^2 - x1^2").to_string(), "-x1^2 - x2^2 + 1.3");
  EXPECT_EQ(Polynomial().to_string(), "0");
  EXPECT_EQ(P("0.1234567891*x1").to_string(), "0.123457*x1");
  EXPECT_EQ(P("0.1234567891*x1").to_string(0), "0.1234567891*x1");
  EXPECT_EQ(Polynomial().degree(), -1);
}

GTEST_TEST(PolynomialTest, RingAxioms) {
  std::mt19937_64 rng(7);
  const Variables vars = Universe();
  for (int trial = 0; trial < 200; ++trial) {
    const Polynomial p = RandomPoly(rng, vars, 4);
    const Polynomial q = RandomPoly(rng, vars, 4);
    const Polynomial r = RandomPoly(rng, vars, 4);
    EXPECT_LE(MaxCoefDiff((p + q) * r, p * r + q * r), 1e-10);
    EXPECT_LE(MaxCoefDiff(p * q, q * p), 1e-10);
    EXPECT_LE(MaxCoefDiff((p * q) * r, p * (q * r)), 1e-10);
    EXPECT_LE(MaxCoefDiff((p + q) + r, p + (q + r)), 1e-10);
    if (!p.is_zero() && !q.is_zero()) {
      EXPECT_EQ((p * q).degree(), p.degree() + q.degree());
    }
  }
}

GTEST_TEST(PolynomialTest, EvaluationIsAdditive) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const Variables vars = Universe();
  for (int trial = 0; trial < 100; ++trial) {
    const Polynomial p = RandomPoly(rng, vars, 4);
    const Polynomial q = RandomPoly(rng, vars, 4);
    std::map<Variable, double> pt;
    for (const auto& v : vars) pt[v] = u(rng);
    EXPECT_NEAR((p + q).evaluate(pt), p.evaluate(pt) + q.evaluate(pt), 1e-12);
  }
}

GTEST_TEST(PolynomialTest, EvaluateAfterSubstitute) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Variables vars = Universe();
  for (int trial = 0; trial < 100; ++trial) {
    const Polynomial p = RandomPoly(rng, vars, 3);
    std::map<Variable, Polynomial> b;
    for (const auto& v : {x1, a1}) b[v] = RandomPoly(rng, vars, 2, 4);
    std::map<Variable, double> pt;
    for (const auto& v : vars) pt[v] = u(rng);
    std::map<Variable, double> image = pt;
    for (const auto& [v, poly] : b) image[v] = poly.evaluate(pt);
    EXPECT_NEAR(substitute(p, b).evaluate(pt), p.evaluate(image), 1e-9);
  }
}

GTEST_TEST(PolynomialTest, GradientIsLinear) {
  std::mt19937_64 rng(17);
  const Variables vars = Universe();
  for (int trial = 0; trial < 100; ++trial) {
    const Polynomial p = RandomPoly(rng, vars, 4);
    const Polynomial q = RandomPoly(rng, vars, 4);
    const double alpha = 0.7;
    const double beta = -1.9;
    const auto lhs = gradient(alpha * p + beta * q, vars);
    const auto gp = gradient(p, vars);
    const auto gq = gradient(q, vars);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      EXPECT_LE(MaxCoefDiff(lhs[i], alpha * gp[i] + beta * gq[i]), 1e-10);
    }
  }
}

GTEST_TEST(PolynomialTest, LieDerivativeMatchesEulerStep) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Variables xs{x1, x2};
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Polynomial V = RandomPoly(rng, xs, 4);
    const std::vector<Polynomial> f{RandomPoly(rng, xs, 3), RandomPoly(rng, xs, 3)};
    const std::vector<double> x{u(rng), u(rng)};
    const double exact = lie_derivative(V, f, xs).evaluate(xs, x);
    if (std::abs(exact) < 1e-2) continue;
    const std::vector<double> step{x[0] + h * f[0].evaluate(xs, x),
                                   x[1] + h * f[1].evaluate(xs, x)};
    const double fd = (V.evaluate(xs, step) - V.evaluate(xs, x)) / h;
    EXPECT_NEAR(fd, exact, 1e-4 * std::abs(exact));
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

}  // namespace
}  // namespace polysafe
