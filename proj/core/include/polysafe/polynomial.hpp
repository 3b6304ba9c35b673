#pragma once

// Sparse multivariate polynomials over named, interned variables.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace polysafe {

enum class VarKind : std::uint8_t { kState = 0, kAttack = 1, kMeasurement = 2 };

std::string_view to_string(VarKind kind);

namespace detail {
struct VarInfo;
}  // namespace detail

/// A named indeterminate. Variables are interned: two handles with the same
/// name and kind compare equal and share storage for the process lifetime.
class Variable {
 public:
  Variable() = default;
  Variable(std::string_view name, VarKind kind);

  const std::string& name() const;
  VarKind kind() const;
  bool valid() const { return info_ != nullptr; }

  friend bool operator==(Variable a, Variable b) { return a.info_ == b.info_; }
  /// Ordered by kind (state, attack, measurement), then by natural name
  /// order so that x2 < x10.
  friend std::strong_ordering operator<=>(Variable a, Variable b);

 private:
  const detail::VarInfo* info_ = nullptr;
};

using Variables = std::vector<Variable>;

/// Builds variables `prefix1 .. prefixN` of the given kind.
Variables make_variables(std::string_view prefix, int count, VarKind kind);

/// Returns the sorted union of two variable lists.
Variables merge_variables(std::span<const Variable> a,
                          std::span<const Variable> b);

/// Product of variable powers. Zero exponents are never stored.
class Monomial {
 public:
  using Factor = std::pair<Variable, int>;

  Monomial() = default;  // the constant monomial 1
  explicit Monomial(Variable v, int exponent = 1);
  explicit Monomial(std::vector<Factor> factors);

  int degree() const { return degree_; }
  int exponent(Variable v) const;
  const std::vector<Factor>& factors() const { return factors_; }
  bool is_constant() const { return factors_.empty(); }

  Monomial operator*(const Monomial& other) const;

  /// Value at a point given as a lookup over the monomial's variables.
  double evaluate(const std::function<double(Variable)>& value) const;

  friend bool operator==(const Monomial& a, const Monomial& b) {
    return a.factors_ == b.factors_;
  }

  std::string to_string() const;

 private:
  std::vector<Factor> factors_;
  int degree_ = 0;
};

/// Monomial order used for storage and basis enumeration: ascending total
/// degree, and within one degree the lexicographically larger monomial
/// first (x1^2, x1*x2, x2^2).
struct MonomialOrder {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

/// True when `a` is lexicographically larger than `b` in variable order.
bool lex_greater(const Monomial& a, const Monomial& b);

/// Global zero-drop tolerance applied by every arithmetic operation.
double zero_tolerance();
void set_zero_tolerance(double tol);

class Polynomial {
 public:
  using Terms = std::map<Monomial, double, MonomialOrder>;

  Polynomial() = default;
  Polynomial(double constant);  // NOLINT(runtime/explicit)
  Polynomial(Variable v);       // NOLINT(runtime/explicit)
  Polynomial(const Monomial& m, double coefficient = 1.0);
  explicit Polynomial(Terms terms);

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  /// Total degree; the zero polynomial has degree -1.
  int degree() const;
  double coefficient(const Monomial& m) const;
  double constant_term() const { return coefficient(Monomial()); }
  double max_abs_coefficient() const;
  Variables variables() const;
  /// Part of the polynomial of exactly the given total degree.
  Polynomial homogeneous_part(int degree) const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double scale);
  Polynomial& operator*=(const Polynomial& other);
  /// Adds coefficient * m without re-running the drop tolerance per call.
  void add_term(const Monomial& m, double coefficient);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) {
    return a += b;
  }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) {
    return a -= b;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  Polynomial operator-() const { return *this * -1.0; }

  /// Coefficient-wise equality.
  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.terms_ == b.terms_;
  }
  /// Max absolute coefficient difference below `tol`.
  bool almost_equal(const Polynomial& other, double tol) const;

  /// Direct summation of terms; throws MissingAssignmentError when a
  /// variable of the polynomial has no value.
  double evaluate(const std::map<Variable, double>& point) const;
  double evaluate(std::span<const Variable> vars,
                  std::span<const double> values) const;

  Polynomial differentiate(Variable v) const;
  Polynomial pow(int exponent) const;

  /// Canonical rendering: graded order with the highest degree first,
  /// `significant_digits` digits per coefficient (0 = shortest round-trip).
  std::string to_string(int significant_digits = 6) const;

 private:
  void prune();
  Terms terms_;
};

std::ostream& operator<<(std::ostream& os, const Polynomial& p);

/// Component i is the partial derivative with respect to vars[i].
std::vector<Polynomial> gradient(const Polynomial& p,
                                 std::span<const Variable> vars);

/// Exact composition p(vars <- bindings); unbound variables are kept.
Polynomial substitute(const Polynomial& p,
                      const std::map<Variable, Polynomial>& bindings);

/// sum_i dV/dvars[i] * field[i]; throws DimensionError when the lengths
/// differ.
Polynomial lie_derivative(const Polynomial& V,
                          std::span<const Polynomial> field,
                          std::span<const Variable> vars);

/// Evaluates a fixed polynomial repeatedly over a fixed variable ordering.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  CompiledPolynomial(const Polynomial& p, std::span<const Variable> vars);
  double operator()(std::span<const double> values) const;

 private:
  struct Term {
    double coefficient;
    std::vector<std::pair<int, int>> powers;
  };
  std::vector<Term> terms_;
};

/// All monomials in `vars` of total degree <= degree, in MonomialOrder.
std::vector<Monomial> monomial_basis(std::span<const Variable> vars,
                                     int degree);

/// Number of monomials of degree <= d in n variables, C(n+d, d).
std::size_t basis_size(int num_vars, int degree);

}  // namespace polysafe
