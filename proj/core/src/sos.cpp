#include "polysafe/sos.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "polysafe/error.hpp"

namespace polysafe {

namespace {

void prune(std::map<int, double>& coeffs) {
  const double tol = zero_tolerance();
  for (auto it = coeffs.begin(); it != coeffs.end();) {
    if (std::abs(it->second) <= tol) {
      it = coeffs.erase(it);
    } else {
      ++it;
    }
  }
}

bool is_zero(const LinExpr& e) {
  return e.coeffs.empty() && std::abs(e.constant) <= zero_tolerance();
}

}  // namespace

LinExpr LinExpr::handle(int h, double scale) {
  LinExpr e;
  if (scale != 0.0) e.coeffs[h] = scale;
  return e;
}

void LinExpr::add_scaled(const LinExpr& other, double scale) {
  constant += scale * other.constant;
  for (const auto& [h, c] : other.coeffs) {
    auto [it, inserted] = coeffs.try_emplace(h, scale * c);
    if (!inserted) it->second += scale * c;
  }
  prune(coeffs);
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  add_scaled(other, 1.0);
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) {
  add_scaled(other, -1.0);
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  constant *= s;
  for (auto& [h, c] : coeffs) c *= s;
  prune(coeffs);
  return *this;
}

double LinExpr::evaluate(const std::vector<double>& values) const {
  double s = constant;
  for (const auto& [h, c] : coeffs) s += c * values.at(static_cast<std::size_t>(h));
  return s;
}

PolyExpr::PolyExpr(const Polynomial& p) {
  for (const auto& [m, c] : p.terms()) terms_.emplace(m, LinExpr(c));
}

void PolyExpr::add_term(const Monomial& m, const LinExpr& c) {
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    if (!is_zero(c)) terms_.emplace(m, c);
    return;
  }
  it->second += c;
  if (is_zero(it->second)) terms_.erase(it);
}

int PolyExpr::degree() const {
  int d = -1;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

int PolyExpr::decision_degree() const {
  int d = -1;
  for (const auto& [m, c] : terms_) {
    if (!c.coeffs.empty()) d = std::max(d, m.degree());
  }
  return d;
}

bool PolyExpr::has_decisions() const { return decision_degree() >= 0; }

Variables PolyExpr::variables() const {
  std::set<Variable> vs;
  for (const auto& [m, c] : terms_) {
    for (const auto& [v, e] : m.factors()) vs.insert(v);
  }
  return {vs.begin(), vs.end()};
}

PolyExpr& PolyExpr::operator+=(const PolyExpr& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

PolyExpr& PolyExpr::operator-=(const PolyExpr& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, c * -1.0);
  return *this;
}

PolyExpr& PolyExpr::operator*=(double s) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (is_zero(it->second)) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  return *this;
}

PolyExpr operator*(const PolyExpr& a, const Polynomial& p) {
  PolyExpr out;
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mp, cp] : p.terms()) {
      out.add_term(ma * mp, ca * cp);
    }
  }
  return out;
}

Polynomial PolyExpr::evaluate(const std::vector<double>& values) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) out.add_term(m, c.evaluate(values));
  return out + Polynomial();
}

LinExpr MatrixDecision::entry(int i, int j) const {
  if (i > j) std::swap(i, j);
  const int idx = i * size - i * (i - 1) / 2 + (j - i);
  LinExpr e = LinExpr::handle(handles.at(static_cast<std::size_t>(idx)));
  if (i == j) e.constant = shift;
  return e;
}

int SosProgram::add_free_handle() {
  handles_.push_back(Handle{Handle::Kind::kFree, -1, 0, 0});
  return static_cast<int>(handles_.size()) - 1;
}

int SosProgram::add_gram_group(int size, std::vector<int>* ids) {
  const int group = static_cast<int>(gram_sizes_.size());
  gram_sizes_.push_back(size);
  for (int i = 0; i < size; ++i) {
    for (int j = i; j < size; ++j) {
      handles_.push_back(Handle{Handle::Kind::kGram, group, i, j});
      ids->push_back(static_cast<int>(handles_.size()) - 1);
    }
  }
  return group;
}

const DecisionPoly& SosProgram::new_free_poly(const std::string& name,
                                              const Variables& vars, int degree,
                                              int min_degree) {
  if (degree < 0) throw MisconfigurationError(name + ": negative degree");
  DecisionPoly d;
  d.name = name;
  d.vars = vars;
  d.degree = degree;
  for (const Monomial& m : monomial_basis(vars, degree)) {
    if (m.degree() < min_degree) continue;
    d.basis.push_back(m);
    const int h = add_free_handle();
    d.handles.push_back(h);
    d.expr.add_term(m, LinExpr::handle(h));
  }
  decisions_.push_back(std::move(d));
  return decisions_.back();
}

const DecisionPoly& SosProgram::new_sos_poly(const std::string& name,
                                             const Variables& vars, int degree) {
  if (degree < 0) throw MisconfigurationError(name + ": negative degree");
  DecisionPoly d;
  d.name = name;
  d.vars = vars;
  d.degree = degree;
  d.sos = true;
  d.basis = monomial_basis(vars, degree / 2);
  const int n = static_cast<int>(d.basis.size());
  add_gram_group(n, &d.handles);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j, ++k) {
      d.expr.add_term(d.basis[static_cast<std::size_t>(i)] *
                          d.basis[static_cast<std::size_t>(j)],
                      LinExpr::handle(d.handles[static_cast<std::size_t>(k)],
                                      i == j ? 1.0 : 2.0));
    }
  }
  decisions_.push_back(std::move(d));
  return decisions_.back();
}

const MatrixDecision& SosProgram::new_psd_matrix(const std::string& name,
                                                 int size, double shift) {
  MatrixDecision m;
  m.name = name;
  m.size = size;
  m.shift = shift;
  add_gram_group(size, &m.handles);
  matrices_.push_back(std::move(m));
  return matrices_.back();
}

int SosProgram::new_free_scalar(const std::string& name) {
  const int h = add_free_handle();
  scalars_[name] = h;
  return h;
}

int SosProgram::new_nonneg_scalar(const std::string& name) {
  std::vector<int> ids;
  add_gram_group(1, &ids);
  scalars_[name] = ids.front();
  return ids.front();
}

void SosProgram::add_sos_constraint(const std::string& name, const PolyExpr& expr,
                                    const Variables& vars) {
  constraints_.push_back(SosConstraint{name, expr, vars});
}

void SosProgram::add_equality(const std::string& name, const LinExpr& expr) {
  equalities_.push_back(LinearEquality{name, expr});
}

const DecisionPoly& SosProgram::decision(const std::string& name) const {
  for (const auto& d : decisions_) {
    if (d.name == name) return d;
  }
  throw MisconfigurationError("no decision polynomial named " + name);
}

const MatrixDecision& SosProgram::matrix(const std::string& name) const {
  for (const auto& m : matrices_) {
    if (m.name == name) return m;
  }
  throw MisconfigurationError("no matrix decision named " + name);
}

int SosProgram::scalar(const std::string& name) const {
  auto it = scalars_.find(name);
  if (it == scalars_.end()) {
    throw MisconfigurationError("no scalar decision named " + name);
  }
  return it->second;
}

namespace {

using EntryKey = std::tuple<int, int, int>;

// Adds c * handle to a row given as block-entry and free-entry accumulators.
void add_handle_term(const IndexMap& index, int h, double c,
                     std::map<EntryKey, double>& entries,
                     std::map<int, double>& free_entries) {
  const auto& slot = index.handle_slots[static_cast<std::size_t>(h)];
  if (slot.free) {
    free_entries[slot.index] += c;
  } else {
    // An off-diagonal handle stands for both (i, j) and (j, i).
    entries[{slot.index, slot.i, slot.j}] += slot.i == slot.j ? c : 0.5 * c;
  }
}

SdpConstraint make_row(const std::map<EntryKey, double>& entries,
                       const std::map<int, double>& free_entries, double rhs) {
  SdpConstraint row;
  for (const auto& [key, v] : entries) {
    if (v == 0.0) continue;
    row.entries.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
  }
  for (const auto& [idx, v] : free_entries) {
    if (v != 0.0) row.free_entries.push_back({idx, v});
  }
  row.rhs = rhs;
  return row;
}

}  // namespace

CompiledSos compile(const SosProgram& prog) {
  CompiledSos out;
  SdpProblem& sdp = out.sdp;
  IndexMap& index = out.index;

  // Gram groups first, then one block per SOS constraint.
  sdp.blocks = prog.gram_group_sizes();
  int free_count = 0;
  index.handle_slots.resize(prog.handles().size());
  for (std::size_t h = 0; h < prog.handles().size(); ++h) {
    const auto& handle = prog.handles()[h];
    auto& slot = index.handle_slots[h];
    if (handle.kind == SosProgram::Handle::Kind::kFree) {
      slot.free = true;
      slot.index = free_count++;
    } else {
      slot.index = handle.group;
      slot.i = handle.i;
      slot.j = handle.j;
    }
  }
  sdp.free_vars = free_count;

  for (const auto& con : prog.constraints()) {
    const int d = con.expr.degree();
    if (d < 0) throw CompileError(con.name + ": empty constraint");
    int half = d / 2;
    if (d % 2 == 1) {
      if (con.expr.decision_degree() < d) {
        throw CompileError(con.name +
                           ": odd-degree leading term, the constraint cannot be "
                           "a sum of squares");
      }
      half = (d + 1) / 2;
    }
    const Variables vars = con.vars.empty() ? con.expr.variables() : con.vars;
    IndexMap::ConstraintInfo info;
    info.block = static_cast<int>(sdp.blocks.size());
    info.basis = monomial_basis(vars, half);
    const int n = static_cast<int>(info.basis.size());
    sdp.blocks.push_back(n);

    // Gram products grouped by monomial.
    std::map<Monomial, std::vector<std::pair<int, int>>, MonomialOrder> products;
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        products[info.basis[static_cast<std::size_t>(i)] *
                 info.basis[static_cast<std::size_t>(j)]]
            .emplace_back(i, j);
      }
    }
    std::set<Monomial, MonomialOrder> rows;
    for (const auto& [m, pairs] : products) rows.insert(m);
    for (const auto& [m, c] : con.expr.terms()) rows.insert(m);

    info.first_row = sdp.num_constraints();
    for (const Monomial& alpha : rows) {
      std::map<EntryKey, double> entries;
      std::map<int, double> free_entries;
      auto pit = products.find(alpha);
      if (pit != products.end()) {
        for (const auto& [i, j] : pit->second) entries[{info.block, i, j}] += 1.0;
      }
      double rhs = 0.0;
      auto eit = con.expr.terms().find(alpha);
      if (eit != con.expr.terms().end()) {
        rhs = eit->second.constant;
        for (const auto& [h, c] : eit->second.coeffs) {
          add_handle_term(index, h, -c, entries, free_entries);
        }
      }
      SdpConstraint row = make_row(entries, free_entries, rhs);
      if (row.entries.empty() && row.free_entries.empty()) {
        if (rhs != 0.0) {
          throw CompileError(con.name + ": coefficient of " + alpha.to_string() +
                             " is fixed to a nonzero value outside the Gram "
                             "basis");
        }
        continue;
      }
      info.row_monomials.push_back(alpha);
      sdp.constraints.push_back(std::move(row));
    }
    index.constraints.push_back(std::move(info));
  }

  for (const auto& eq : prog.equalities()) {
    std::map<EntryKey, double> entries;
    std::map<int, double> free_entries;
    for (const auto& [h, c] : eq.expr.coeffs) {
      add_handle_term(index, h, c, entries, free_entries);
    }
    SdpConstraint row = make_row(entries, free_entries, -eq.expr.constant);
    if (row.entries.empty() && row.free_entries.empty()) {
      if (row.rhs != 0.0) throw CompileError(eq.name + ": inconsistent equality");
      continue;
    }
    sdp.constraints.push_back(std::move(row));
  }

  // Objective.
  std::map<EntryKey, double> obj_entries;
  std::map<int, double> obj_free;
  for (const auto& [h, c] : prog.objective().coeffs) {
    add_handle_term(index, h, c, obj_entries, obj_free);
  }
  for (const auto& [key, v] : obj_entries) {
    if (v != 0.0) {
      sdp.objective.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
    }
  }
  if (!obj_free.empty()) {
    sdp.free_objective.assign(static_cast<std::size_t>(free_count), 0.0);
    for (const auto& [idx, v] : obj_free) {
      sdp.free_objective[static_cast<std::size_t>(idx)] = v;
    }
  }
  index.objective_offset = prog.objective().constant;
  return out;
}

Polynomial gram_polynomial(const std::vector<Monomial>& basis,
                           const Eigen::MatrixXd& Q) {
  Polynomial out;
  const auto n = static_cast<Eigen::Index>(basis.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.add_term(basis[static_cast<std::size_t>(i)] * basis[static_cast<std::size_t>(i)],
                 Q(i, i));
    for (Eigen::Index j = i + 1; j < n; ++j) {
      out.add_term(basis[static_cast<std::size_t>(i)] * basis[static_cast<std::size_t>(j)],
                   Q(i, j) + Q(j, i));
    }
  }
  return out + Polynomial();
}

namespace {

double max_mismatch(const Polynomial& a, const Polynomial& b) {
  double worst = 0.0;
  for (const auto& [m, c] : a.terms()) worst = std::max(worst, std::abs(c - b.coefficient(m)));
  for (const auto& [m, c] : b.terms()) {
    if (a.coefficient(m) == 0.0) worst = std::max(worst, std::abs(c));
  }
  return worst;
}

double min_eig(const Eigen::MatrixXd& Q) {
  if (Q.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

// Minimal-Frobenius-norm symmetric correction making z'Qz match p exactly on
// every monomial the basis can represent.
GramDecomposition polish(const std::vector<Monomial>& basis, Eigen::MatrixXd Q,
                         const Polynomial& p) {
  GramDecomposition g;
  g.basis = basis;
  const Polynomial before = gram_polynomial(basis, Q);
  g.raw_defect = max_mismatch(p, before);
  std::map<Monomial, std::vector<std::pair<int, int>>, MonomialOrder> pairs;
  const int n = static_cast<int>(basis.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      pairs[basis[static_cast<std::size_t>(i)] * basis[static_cast<std::size_t>(j)]]
          .emplace_back(i, j);
    }
  }
  for (const auto& [m, list] : pairs) {
    const double r = p.coefficient(m) - before.coefficient(m);
    if (r == 0.0) continue;
    const double share = r / static_cast<double>(list.size());
    for (const auto& [i, j] : list) Q(i, j) += share;
  }
  g.Q = Q;
  g.defect = max_mismatch(p, gram_polynomial(basis, g.Q));
  g.min_eigenvalue = min_eig(g.Q);
  return g;
}

}  // namespace

SosSolution lift_solution(const SosProgram& prog, const CompiledSos& compiled,
                          const SdpSolution& sol) {
  if (!sol.usable()) {
    throw StatusError("cannot lift an SDP solution with status " +
                      std::string(to_string(sol.status)));
  }
  const IndexMap& index = compiled.index;
  SosSolution out;
  out.values.resize(prog.handles().size());
  for (std::size_t h = 0; h < out.values.size(); ++h) {
    const auto& slot = index.handle_slots[h];
    out.values[h] = slot.free ? sol.u(slot.index)
                              : sol.X[static_cast<std::size_t>(slot.index)](slot.i, slot.j);
  }
  for (const auto& d : prog.decisions()) {
    out.polys[d.name] = d.expr.evaluate(out.values);
    if (d.sos) {
      const int group = prog.handles()[static_cast<std::size_t>(d.handles.front())].group;
      GramDecomposition g;
      g.basis = d.basis;
      g.Q = sol.X[static_cast<std::size_t>(group)];
      g.min_eigenvalue = min_eig(g.Q);
      out.decision_grams[d.name] = std::move(g);
    }
  }
  for (const auto& m : prog.matrices()) {
    Eigen::MatrixXd M(m.size, m.size);
    for (int i = 0; i < m.size; ++i) {
      for (int j = 0; j < m.size; ++j) M(i, j) = m.entry(i, j).evaluate(out.values);
    }
    out.matrices[m.name] = M;
  }
  for (const auto& [name, h] : prog.scalars()) {
    out.scalars[name] = out.values[static_cast<std::size_t>(h)];
  }
  for (std::size_t c = 0; c < prog.constraints().size(); ++c) {
    const auto& con = prog.constraints()[c];
    const auto& info = index.constraints[c];
    const Polynomial p = con.expr.evaluate(out.values);
    out.constraint_polys[con.name] = p;
    out.constraint_grams[con.name] =
        polish(info.basis, sol.X[static_cast<std::size_t>(info.block)], p);
  }
  out.objective = prog.objective().evaluate(out.values);
  return out;
}

SosCheck check_sos(const Polynomial& p, const Variables& vars,
                   const SolverSettings& settings) {
  SosProgram prog;
  prog.add_sos_constraint("p", PolyExpr(p), vars);
  const CompiledSos compiled = compile(prog);
  const SdpSolution sol = solve_sdp(compiled.sdp, settings);
  SosCheck out;
  out.status = sol.status;
  out.feasible = sol.usable();
  if (out.feasible) {
    out.gram = lift_solution(prog, compiled, sol).constraint_grams.at("p");
  }
  return out;
}

}  // namespace polysafe
