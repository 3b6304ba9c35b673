#pragma once

// Sum-of-squares programs: polynomial-valued affine expressions in scalar
// decision handles, SOS membership constraints, and their compilation to
// block-diagonal SDPs.

#include <deque>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polysafe/polynomial.hpp"
#include "polysafe/sdp.hpp"

namespace polysafe {

/// constant + sum_h coeffs[h] * value(h) over decision handles h.
struct LinExpr {
  double constant = 0.0;
  std::map<int, double> coeffs;

  LinExpr() = default;
  LinExpr(double c) : constant(c) {}  // NOLINT(runtime/explicit)
  static LinExpr handle(int h, double scale = 1.0);

  bool is_constant() const { return coeffs.empty(); }
  /// Adds scale * other.
  void add_scaled(const LinExpr& other, double scale);
  LinExpr& operator+=(const LinExpr& other);
  LinExpr& operator-=(const LinExpr& other);
  LinExpr& operator*=(double s);
  friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
  friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
  friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
  friend LinExpr operator*(double s, LinExpr a) { return a *= s; }

  double evaluate(const std::vector<double>& values) const;
};

/// Polynomial whose coefficients are affine in decision handles.
class PolyExpr {
 public:
  using Terms = std::map<Monomial, LinExpr, MonomialOrder>;

  PolyExpr() = default;
  PolyExpr(const Polynomial& p);  // NOLINT(runtime/explicit)

  const Terms& terms() const { return terms_; }
  void add_term(const Monomial& m, const LinExpr& c);
  /// Highest degree carrying a nonzero constant or any decision term.
  int degree() const;
  /// Highest degree at which some decision handle appears, -1 if none.
  int decision_degree() const;
  bool has_decisions() const;
  Variables variables() const;

  PolyExpr& operator+=(const PolyExpr& other);
  PolyExpr& operator-=(const PolyExpr& other);
  PolyExpr& operator*=(double s);
  friend PolyExpr operator+(PolyExpr a, const PolyExpr& b) { return a += b; }
  friend PolyExpr operator-(PolyExpr a, const PolyExpr& b) { return a -= b; }
  friend PolyExpr operator*(PolyExpr a, double s) { return a *= s; }
  friend PolyExpr operator*(double s, PolyExpr a) { return a *= s; }
  friend PolyExpr operator*(const PolyExpr& a, const Polynomial& p);
  friend PolyExpr operator*(const Polynomial& p, const PolyExpr& a) {
    return a * p;
  }
  PolyExpr operator-() const { return *this * -1.0; }

  Polynomial evaluate(const std::vector<double>& values) const;

 private:
  Terms terms_;
};

/// A decision polynomial: free coefficients or a Gram parameterization.
struct DecisionPoly {
  std::string name;
  Variables vars;
  int degree = 0;
  bool sos = false;
  /// Free: one handle per basis monomial. SOS: Gram handle ids, upper
  /// triangle row-major.
  std::vector<Monomial> basis;
  std::vector<int> handles;
  PolyExpr expr;
};

/// Symmetric PSD matrix decision, optionally shifted: value = shift*I + M,
/// M PSD.
struct MatrixDecision {
  std::string name;
  int size = 0;
  double shift = 0.0;
  std::vector<int> handles;  // upper triangle row-major
  /// Expression of entry (i, j) including the shift.
  LinExpr entry(int i, int j) const;
};

struct SosConstraint {
  std::string name;
  PolyExpr expr;
  /// Gram basis variables; empty means the variables of expr.
  Variables vars;
};

struct LinearEquality {
  std::string name;
  LinExpr expr;  // expr == 0
};

class SosProgram {
 public:
  /// Free polynomial of degree <= degree (terms of degree < min_degree
  /// omitted).
  const DecisionPoly& new_free_poly(const std::string& name, const Variables& vars,
                                    int degree, int min_degree = 0);
  /// SOS polynomial z' Q z with z the monomials of degree <= degree / 2.
  const DecisionPoly& new_sos_poly(const std::string& name, const Variables& vars,
                                   int degree);
  const MatrixDecision& new_psd_matrix(const std::string& name, int size,
                                       double shift = 0.0);
  int new_free_scalar(const std::string& name);
  /// Scalar constrained to be >= 0 (a 1x1 PSD block).
  int new_nonneg_scalar(const std::string& name);

  void add_sos_constraint(const std::string& name, const PolyExpr& expr,
                          const Variables& vars = {});
  void add_equality(const std::string& name, const LinExpr& expr);
  void set_objective(const LinExpr& objective) { objective_ = objective; }

  const std::deque<DecisionPoly>& decisions() const { return decisions_; }
  const std::deque<MatrixDecision>& matrices() const { return matrices_; }
  const std::vector<SosConstraint>& constraints() const { return constraints_; }
  const std::vector<LinearEquality>& equalities() const { return equalities_; }
  const LinExpr& objective() const { return objective_; }
  int num_handles() const { return static_cast<int>(handles_.size()); }
  const DecisionPoly& decision(const std::string& name) const;
  const MatrixDecision& matrix(const std::string& name) const;
  int scalar(const std::string& name) const;
  const std::map<std::string, int>& scalars() const { return scalars_; }

  struct Handle {
    enum class Kind { kFree, kGram } kind = Kind::kFree;
    int group = 0;  // owning Gram group (SOS decision, matrix or scalar)
    int i = 0;
    int j = 0;
  };
  const std::vector<Handle>& handles() const { return handles_; }
  /// Gram groups in creation order with their sizes.
  const std::vector<int>& gram_group_sizes() const { return gram_sizes_; }

 private:
  int add_free_handle();
  int add_gram_group(int size, std::vector<int>* ids);

  std::vector<Handle> handles_;
  std::vector<int> gram_sizes_;
  std::deque<DecisionPoly> decisions_;
  std::deque<MatrixDecision> matrices_;
  std::map<std::string, int> scalars_;
  std::vector<SosConstraint> constraints_;
  std::vector<LinearEquality> equalities_;
  LinExpr objective_;
};

/// Where each handle and each SOS constraint landed in the SDP.
struct IndexMap {
  struct Slot {
    bool free = false;
    int index = 0;  // free var index, or block
    int i = 0;
    int j = 0;
  };
  std::vector<Slot> handle_slots;
  struct ConstraintInfo {
    int block = 0;
    std::vector<Monomial> basis;
    std::vector<Monomial> row_monomials;
    int first_row = 0;
  };
  std::vector<ConstraintInfo> constraints;
  double objective_offset = 0.0;
};

struct CompiledSos {
  SdpProblem sdp;
  IndexMap index;
};

/// Throws CompileError for an odd-degree decision-free leading part, an
/// identically zero constraint, or a matching row that forces a nonzero
/// constant to zero.
CompiledSos compile(const SosProgram& prog);

struct GramDecomposition {
  std::vector<Monomial> basis;
  Eigen::MatrixXd Q;
  /// Max abs coefficient mismatch of z'Qz against the constraint before
  /// polishing.
  double raw_defect = 0.0;
  /// Same after the minimal-norm correction of Q.
  double defect = 0.0;
  double min_eigenvalue = 0.0;
};

/// z(x)' Q z(x) expanded.
Polynomial gram_polynomial(const std::vector<Monomial>& basis,
                           const Eigen::MatrixXd& Q);

struct SosSolution {
  std::vector<double> values;  // per handle
  std::map<std::string, Polynomial> polys;
  std::map<std::string, GramDecomposition> decision_grams;
  std::map<std::string, Eigen::MatrixXd> matrices;
  std::map<std::string, double> scalars;
  /// One per SOS constraint, keyed by constraint name.
  std::map<std::string, GramDecomposition> constraint_grams;
  std::map<std::string, Polynomial> constraint_polys;
  double objective = 0.0;
};

/// Materializes decisions and Gram matrices; throws StatusError unless the
/// solution is usable.
SosSolution lift_solution(const SosProgram& prog, const CompiledSos& compiled,
                          const SdpSolution& sol);

struct SosCheck {
  bool feasible = false;
  SdpStatus status = SdpStatus::kNumericalFailure;
  GramDecomposition gram;
};

/// Searches for a Gram certificate that p is a sum of squares.
SosCheck check_sos(const Polynomial& p, const Variables& vars = {},
                   const SolverSettings& settings = {});

}  // namespace polysafe
