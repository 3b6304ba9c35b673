#include "polysafe/polynomial.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <deque>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>

#include "polysafe/error.hpp"

namespace polysafe {

namespace detail {
struct VarInfo {
  std::string name;
  VarKind kind;
};
}  // namespace detail

namespace {

struct Registry {
  std::mutex mutex;
  std::deque<detail::VarInfo> storage;
  std::map<std::pair<std::string, VarKind>, const detail::VarInfo*> index;
};

Registry& registry() {
  static Registry instance;
  return instance;
}

// Natural ordering: digit runs compare numerically.
int natural_compare(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie])))
        ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je])))
        ++je;
      std::string_view ra = a.substr(i, ie - i), rb = b.substr(j, je - j);
      while (ra.size() > 1 && ra.front() == '0') ra.remove_prefix(1);
      while (rb.size() > 1 && rb.front() == '0') rb.remove_prefix(1);
      if (ra.size() != rb.size()) return ra.size() < rb.size() ? -1 : 1;
      if (const int c = ra.compare(rb); c != 0) return c < 0 ? -1 : 1;
      i = ie;
      j = je;
      continue;
    }
    if (a[i] != b[j]) return a[i] < b[j] ? -1 : 1;
    ++i;
    ++j;
  }
  if (i == a.size() && j == b.size()) return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1);
  return i == a.size() ? -1 : 1;
}

std::atomic<double> g_zero_tolerance{1e-12};

std::string format_coefficient(double value, int digits) {
  if (digits <= 0) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, end);
  }
  std::ostringstream os;
  os << std::setprecision(digits) << value;
  return os.str();
}

}  // namespace

std::string_view to_string(VarKind kind) {
  switch (kind) {
    case VarKind::kState:
      return "state";
    case VarKind::kAttack:
      return "attack";
    case VarKind::kMeasurement:
      return "measurement";
  }
  return "unknown";
}

Variable::Variable(std::string_view name, VarKind kind) {
  Registry& reg = registry();
  std::lock_guard lock(reg.mutex);
  auto key = std::make_pair(std::string(name), kind);
  if (auto it = reg.index.find(key); it != reg.index.end()) {
    info_ = it->second;
    return;
  }
  reg.storage.push_back(detail::VarInfo{std::string(name), kind});
  info_ = &reg.storage.back();
  reg.index.emplace(std::move(key), info_);
}

const std::string& Variable::name() const {
  static const std::string kInvalid = "<invalid>";
  return info_ ? info_->name : kInvalid;
}

VarKind Variable::kind() const { return info_ ? info_->kind : VarKind::kState; }

std::strong_ordering operator<=>(Variable a, Variable b) {
  if (a.info_ == b.info_) return std::strong_ordering::equal;
  if (!a.info_) return std::strong_ordering::less;
  if (!b.info_) return std::strong_ordering::greater;
  if (a.info_->kind != b.info_->kind) return a.info_->kind <=> b.info_->kind;
  const int c = natural_compare(a.info_->name, b.info_->name);
  return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
}

Variables make_variables(std::string_view prefix, int count, VarKind kind) {
  Variables out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    out.emplace_back(std::string(prefix) + std::to_string(i), kind);
  }
  return out;
}

Variables merge_variables(std::span<const Variable> a,
                          std::span<const Variable> b) {
  Variables out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------- Monomial

Monomial::Monomial(Variable v, int exponent) {
  if (exponent < 0) throw Error("negative exponent in monomial");
  if (exponent > 0) {
    factors_.emplace_back(v, exponent);
    degree_ = exponent;
  }
}

Monomial::Monomial(std::vector<Factor> factors) {
  std::sort(factors.begin(), factors.end(),
            [](const Factor& x, const Factor& y) { return x.first < y.first; });
  for (const auto& [v, e] : factors) {
    if (e < 0) throw Error("negative exponent in monomial");
    if (e == 0) continue;
    if (!factors_.empty() && factors_.back().first == v) {
      factors_.back().second += e;
    } else {
      factors_.emplace_back(v, e);
    }
    degree_ += e;
  }
}

int Monomial::exponent(Variable v) const {
  for (const auto& [var, e] : factors_) {
    if (var == v) return e;
  }
  return 0;
}

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial out;
  out.factors_.reserve(factors_.size() + other.factors_.size());
  auto i = factors_.begin();
  auto j = other.factors_.begin();
  while (i != factors_.end() || j != other.factors_.end()) {
    if (j == other.factors_.end() ||
        (i != factors_.end() && i->first < j->first)) {
      out.factors_.push_back(*i++);
    } else if (i == factors_.end() || j->first < i->first) {
      out.factors_.push_back(*j++);
    } else {
      out.factors_.emplace_back(i->first, i->second + j->second);
      ++i;
      ++j;
    }
  }
  out.degree_ = degree_ + other.degree_;
  return out;
}

double Monomial::evaluate(const std::function<double(Variable)>& value) const {
  double out = 1.0;
  for (const auto& [v, e] : factors_) {
    const double base = value(v);
    for (int k = 0; k < e; ++k) out *= base;
  }
  return out;
}

std::string Monomial::to_string() const {
  if (factors_.empty()) return "1";
  std::string out;
  for (const auto& [v, e] : factors_) {
    if (!out.empty()) out += '*';
    out += v.name();
    if (e != 1) out += "^" + std::to_string(e);
  }
  return out;
}

namespace {
int lex_compare(const Monomial& a, const Monomial& b) {
  const auto& fa = a.factors();
  const auto& fb = b.factors();
  std::size_t i = 0, j = 0;
  while (i < fa.size() || j < fb.size()) {
    if (j == fb.size() || (i < fa.size() && fa[i].first < fb[j].first)) {
      return 1;
    }
    if (i == fa.size() || fb[j].first < fa[i].first) return -1;
    if (fa[i].second != fb[j].second) {
      return fa[i].second > fb[j].second ? 1 : -1;
    }
    ++i;
    ++j;
  }
  return 0;
}
}  // namespace

bool lex_greater(const Monomial& a, const Monomial& b) {
  return lex_compare(a, b) > 0;
}

bool MonomialOrder::operator()(const Monomial& a, const Monomial& b) const {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  return lex_compare(a, b) > 0;
}

// -------------------------------------------------------------- Polynomial

double zero_tolerance() { return g_zero_tolerance.load(); }
void set_zero_tolerance(double tol) { g_zero_tolerance.store(tol); }

Polynomial::Polynomial(double constant) {
  if (std::abs(constant) >= zero_tolerance() && constant != 0.0) {
    terms_.emplace(Monomial(), constant);
  }
}

Polynomial::Polynomial(Variable v) { terms_.emplace(Monomial(v), 1.0); }

Polynomial::Polynomial(const Monomial& m, double coefficient) {
  if (std::abs(coefficient) >= zero_tolerance() && coefficient != 0.0) {
    terms_.emplace(m, coefficient);
  }
}

Polynomial::Polynomial(Terms terms) : terms_(std::move(terms)) { prune(); }

void Polynomial::prune() {
  const double tol = zero_tolerance();
  std::erase_if(terms_, [tol](const auto& kv) {
    return kv.second == 0.0 || std::abs(kv.second) < tol;
  });
}

int Polynomial::degree() const {
  if (terms_.empty()) return -1;
  return terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coefficient() const {
  double out = 0.0;
  for (const auto& [m, c] : terms_) out = std::max(out, std::abs(c));
  return out;
}

Variables Polynomial::variables() const {
  Variables out;
  for (const auto& [m, c] : terms_) {
    for (const auto& [v, e] : m.factors()) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Polynomial Polynomial::homogeneous_part(int degree) const {
  Terms out;
  for (const auto& [m, c] : terms_) {
    if (m.degree() == degree) out.emplace(m, c);
  }
  return Polynomial(std::move(out));
}

void Polynomial::add_term(const Monomial& m, double coefficient) {
  if (coefficient == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, coefficient);
  if (!inserted) {
    it->second += coefficient;
    if (it->second == 0.0 || std::abs(it->second) < zero_tolerance()) {
      terms_.erase(it);
    }
  } else if (std::abs(coefficient) < zero_tolerance()) {
    terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double scale) {
  for (auto& [m, c] : terms_) c *= scale;
  prune();
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& other) {
  *this = *this * other;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial::Terms out;
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) {
      out[ma * mb] += ca * cb;
    }
  }
  return Polynomial(std::move(out));
}

bool Polynomial::almost_equal(const Polynomial& other, double tol) const {
  Polynomial diff = *this - other;
  return diff.max_abs_coefficient() <= tol;
}

double Polynomial::evaluate(const std::map<Variable, double>& point) const {
  double out = 0.0;
  for (const auto& [m, c] : terms_) {
    double term = c;
    for (const auto& [v, e] : m.factors()) {
      auto it = point.find(v);
      if (it == point.end()) {
        throw MissingAssignmentError("no value assigned to variable '" +
                                     v.name() + "'");
      }
      for (int k = 0; k < e; ++k) term *= it->second;
    }
    out += term;
  }
  return out;
}

double Polynomial::evaluate(std::span<const Variable> vars,
                            std::span<const double> values) const {
  if (vars.size() != values.size()) {
    throw DimensionError("evaluate: variable and value counts differ");
  }
  std::map<Variable, double> point;
  for (std::size_t i = 0; i < vars.size(); ++i) point[vars[i]] = values[i];
  return evaluate(point);
}

Polynomial Polynomial::differentiate(Variable v) const {
  Terms out;
  for (const auto& [m, c] : terms_) {
    const int e = m.exponent(v);
    if (e == 0) continue;
    std::vector<Monomial::Factor> factors = m.factors();
    for (auto& f : factors) {
      if (f.first == v) f.second -= 1;
    }
    out[Monomial(std::move(factors))] += c * e;
  }
  return Polynomial(std::move(out));
}

Polynomial Polynomial::pow(int exponent) const {
  if (exponent < 0) throw Error("negative polynomial power");
  Polynomial result(1.0);
  Polynomial base = *this;
  while (exponent > 0) {
    if (exponent & 1) result *= base;
    exponent >>= 1;
    if (exponent > 0) base = base * base;
  }
  return result;
}

std::string Polynomial::to_string(int significant_digits) const {
  if (terms_.empty()) return "0";
  std::vector<std::pair<Monomial, double>> ordered(terms_.begin(),
                                                   terms_.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) {
                     return a.first.degree() > b.first.degree();
                   });
  std::string out;
  bool first = true;
  for (const auto& [m, c] : ordered) {
    const bool negative = c < 0;
    const double mag = std::abs(c);
    if (first) {
      if (negative) out += '-';
    } else {
      out += negative ? " - " : " + ";
    }
    first = false;
    const std::string coef = format_coefficient(mag, significant_digits);
    if (m.is_constant()) {
      out += coef;
    } else if (coef == "1") {
      out += m.to_string();
    } else {
      out += coef + "*" + m.to_string();
    }
  }
  return out;
}

std::ostream& operator<<(std::ostream& os, const Polynomial& p) {
  return os << p.to_string();
}

std::vector<Polynomial> gradient(const Polynomial& p,
                                 std::span<const Variable> vars) {
  std::vector<Polynomial> out;
  out.reserve(vars.size());
  for (Variable v : vars) out.push_back(p.differentiate(v));
  return out;
}

Polynomial substitute(const Polynomial& p,
                      const std::map<Variable, Polynomial>& bindings) {
  std::map<std::pair<Variable, int>, Polynomial> power_cache;
  auto power = [&](Variable v, int e) -> const Polynomial& {
    auto key = std::make_pair(v, e);
    auto it = power_cache.find(key);
    if (it == power_cache.end()) {
      it = power_cache.emplace(key, bindings.at(v).pow(e)).first;
    }
    return it->second;
  };
  Polynomial out;
  for (const auto& [m, c] : p.terms()) {
    Polynomial term(c);
    std::vector<Monomial::Factor> kept;
    for (const auto& [v, e] : m.factors()) {
      if (bindings.count(v)) {
        term *= power(v, e);
      } else {
        kept.emplace_back(v, e);
      }
    }
    if (!kept.empty()) term *= Polynomial(Monomial(std::move(kept)));
    out += term;
  }
  return out;
}

Polynomial lie_derivative(const Polynomial& V,
                          std::span<const Polynomial> field,
                          std::span<const Variable> vars) {
  if (field.size() != vars.size()) {
    throw DimensionError("lie_derivative: field has " +
                         std::to_string(field.size()) + " components but " +
                         std::to_string(vars.size()) + " variables");
  }
  Polynomial out;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    Polynomial partial = V.differentiate(vars[i]);
    if (partial.is_zero()) continue;
    out += partial * field[i];
  }
  return out;
}

CompiledPolynomial::CompiledPolynomial(const Polynomial& p,
                                       std::span<const Variable> vars) {
  for (const auto& [m, c] : p.terms()) {
    Term term{c, {}};
    for (const auto& [v, e] : m.factors()) {
      auto it = std::find(vars.begin(), vars.end(), v);
      if (it == vars.end()) {
        throw MissingAssignmentError("no value assigned to variable '" +
                                     v.name() + "'");
      }
      term.powers.emplace_back(static_cast<int>(it - vars.begin()), e);
    }
    terms_.push_back(std::move(term));
  }
}

double CompiledPolynomial::operator()(std::span<const double> values) const {
  double out = 0.0;
  for (const auto& term : terms_) {
    double t = term.coefficient;
    for (const auto& [idx, e] : term.powers) {
      const double base = values[static_cast<std::size_t>(idx)];
      for (int k = 0; k < e; ++k) t *= base;
    }
    out += t;
  }
  return out;
}

std::vector<Monomial> monomial_basis(std::span<const Variable> vars,
                                     int degree) {
  if (degree < 0) return {};
  Variables sorted(vars.begin(), vars.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<Monomial> out;
  std::vector<int> exps(sorted.size(), 0);
  // Depth-first enumeration of exponent vectors with bounded total degree.
  std::function<void(std::size_t, int)> recurse = [&](std::size_t k,
                                                       int remaining) {
    if (k == sorted.size()) {
      std::vector<Monomial::Factor> factors;
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (exps[i] > 0) factors.emplace_back(sorted[i], exps[i]);
      }
      out.emplace_back(std::move(factors));
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      exps[k] = e;
      recurse(k + 1, remaining - e);
    }
    exps[k] = 0;
  };
  recurse(0, degree);
  std::sort(out.begin(), out.end(), MonomialOrder{});
  return out;
}

std::size_t basis_size(int num_vars, int degree) {
  if (degree < 0) return 0;
  // C(n + d, d) computed incrementally to stay exact.
  std::size_t out = 1;
  for (int k = 1; k <= degree; ++k) {
    out = out * static_cast<std::size_t>(num_vars + k) /
          static_cast<std::size_t>(k);
  }
  return out;
}

}  // namespace polysafe
