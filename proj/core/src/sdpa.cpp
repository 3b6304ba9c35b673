#include "polysafe/sdpa.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "polysafe/error.hpp"

namespace polysafe {

namespace {

std::string shortest(double v) {
  if (v == 0.0) v = 0.0;  // drops the sign of -0
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// Shortest form that still reads as a float literal ("1.0", "2.5e-07").
std::string repr(double v) {
  std::string s = shortest(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

using Key = std::tuple<int, int, int, int>;  // k, blk, i, j (1-based)

void put(std::map<Key, double>& out, int k, int blk, int i, int j, double v) {
  if (i > j) std::swap(i, j);
  out[{k, blk, i + 1, j + 1}] += v;
}

struct Token {
  std::string text;
  std::size_t line;
};

std::vector<Token> tokenize(std::string_view text, int* free_vars) {
  std::vector<Token> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '*' || line[first] == '"') {
      std::istringstream is(line.substr(first + 1));
      std::string word;
      int n = 0;
      if (free_vars && is >> word >> n && word == "free_vars") *free_vars = n;
      continue;
    }
    // Header annotations such as `2 =mdim`.
    if (const auto eq = line.find('='); eq != std::string::npos) line.resize(eq);
    for (char& c : line) {
      if (c == ',' || c == '{' || c == '}' || c == '(' || c == ')') c = ' ';
    }
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back({tok, line_no});
  }
  return out;
}

double number(const Token& t) {
  double v = 0.0;
  const char* b = t.text.data();
  const char* e = b + t.text.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) {
    throw MalformedResultError("expected a number, got '" + t.text + "'", t.line);
  }
  return v;
}

int integer(const Token& t) {
  const double v = number(t);
  if (v != std::floor(v)) throw MalformedResultError("expected an integer, got '" + t.text + "'", t.line);
  return static_cast<int>(v);
}

}  // namespace

std::string export_sdpa(const SdpProblem& prob, const SdpaExportOptions& opts) {
  prob.validate();
  const int nb = static_cast<int>(prob.blocks.size());
  const int nf = prob.free_vars;
  const int free_blk = nb + 1;
  const double sign = opts.negate_objective ? -1.0 : 1.0;
  std::map<Key, double> entries;
  for (const auto& e : prob.objective) put(entries, 0, e.block + 1, e.i, e.j, sign * e.value);
  for (int t = 0; t < nf && t < static_cast<int>(prob.free_objective.size()); ++t) {
    put(entries, 0, free_blk, t, t, sign * prob.free_objective[static_cast<std::size_t>(t)]);
    put(entries, 0, free_blk, nf + t, nf + t, -sign * prob.free_objective[static_cast<std::size_t>(t)]);
  }
  for (int k = 0; k < prob.num_constraints(); ++k) {
    const SdpConstraint& c = prob.constraints[static_cast<std::size_t>(k)];
    for (const auto& e : c.entries) put(entries, k + 1, e.block + 1, e.i, e.j, e.value);
    for (const auto& f : c.free_entries) {
      put(entries, k + 1, free_blk, f.index, f.index, f.value);
      put(entries, k + 1, free_blk, nf + f.index, nf + f.index, -f.value);
    }
  }

  std::ostringstream os;
  if (nf > 0) os << "* free_vars " << nf << "\n";
  os << prob.num_constraints() << "\n";
  os << nb + (nf > 0 ? 1 : 0) << "\n";
  for (int b = 0; b < nb; ++b) os << (b ? " " : "") << prob.blocks[static_cast<std::size_t>(b)];
  if (nf > 0) os << (nb ? " " : "") << -2 * nf;
  os << "\n";
  for (int k = 0; k < prob.num_constraints(); ++k) {
    os << (k ? " " : "") << shortest(prob.constraints[static_cast<std::size_t>(k)].rhs);
  }
  os << "\n";
  for (const auto& [key, v] : entries) {
    if (v == 0.0) continue;
    const auto [k, blk, i, j] = key;
    os << k << " " << blk << " " << i << " " << j << " " << repr(v) << "\n";
  }
  return os.str();
}

SdpProblem import_sdpa(std::string_view text) {
  int nf = 0;
  const std::vector<Token> toks = tokenize(text, &nf);
  std::size_t p = 0;
  const std::size_t last_line = toks.empty() ? 1 : toks.back().line;
  auto next = [&]() -> const Token& {
    if (p >= toks.size()) throw MalformedResultError("unexpected end of file", last_line + 1);
    return toks[p++];
  };
  const Token& mt = next();
  const int m = integer(mt);
  if (m < 0) throw MalformedResultError("negative constraint count", mt.line);
  const Token& nt = next();
  const int nb_file = integer(nt);
  if (nb_file < 0) throw MalformedResultError("negative block count", nt.line);
  std::vector<int> sizes;
  for (int b = 0; b < nb_file; ++b) {
    const Token& t = next();
    const int s = integer(t);
    if (s == 0) throw MalformedResultError("zero block size", t.line);
    sizes.push_back(s);
  }
  const bool has_free = nf > 0;
  if (has_free && (sizes.empty() || sizes.back() != -2 * nf)) {
    throw MalformedResultError("free_vars comment does not match the last block", nt.line);
  }

  // File block -> (first internal block, is diagonal). Diagonal blocks
  // become runs of 1x1 blocks.
  SdpProblem prob;
  std::vector<int> first_block(static_cast<std::size_t>(nb_file), 0);
  const int real_blocks = nb_file - (has_free ? 1 : 0);
  for (int b = 0; b < real_blocks; ++b) {
    first_block[static_cast<std::size_t>(b)] = static_cast<int>(prob.blocks.size());
    const int s = sizes[static_cast<std::size_t>(b)];
    if (s > 0) {
      prob.blocks.push_back(s);
    } else {
      for (int i = 0; i < -s; ++i) prob.blocks.push_back(1);
    }
  }
  prob.free_vars = nf;
  prob.free_objective.assign(static_cast<std::size_t>(nf), 0.0);
  prob.constraints.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) prob.constraints[static_cast<std::size_t>(k)].rhs = number(next());

  // Split free columns: the u+ coefficient, or minus the u- one when only
  // that half is present.
  std::map<std::pair<int, int>, std::pair<double, double>> split;
  while (p < toks.size()) {
    if (toks.size() - p < 5) {
      throw MalformedResultError("truncated entry", toks.back().line);
    }
    const Token& kt = next();
    const int k = integer(kt);
    const int blk = integer(next());
    int i = integer(next());
    int j = integer(next());
    const double v = number(next());
    if (k < 0 || k > m) throw MalformedResultError("constraint index out of range", kt.line);
    if (blk < 1 || blk > nb_file) throw MalformedResultError("block index out of range", kt.line);
    const int s = sizes[static_cast<std::size_t>(blk - 1)];
    const int dim = std::abs(s);
    if (i < 1 || j < 1 || i > dim || j > dim) {
      throw MalformedResultError("entry index out of range", kt.line);
    }
    if (i > j) std::swap(i, j);
    if (s < 0 && i != j) throw MalformedResultError("off-diagonal entry in a diagonal block", kt.line);
    if (has_free && blk == nb_file) {
      const int idx = i - 1;
      auto& slot = split[{k, idx % nf}];
      (idx < nf ? slot.first : slot.second) += v;
      continue;
    }
    BlockEntry e;
    if (s > 0) {
      e = {first_block[static_cast<std::size_t>(blk - 1)], i - 1, j - 1, v};
    } else {
      e = {first_block[static_cast<std::size_t>(blk - 1)] + i - 1, 0, 0, v};
    }
    if (k == 0) {
      prob.objective.push_back(e);
    } else {
      prob.constraints[static_cast<std::size_t>(k - 1)].entries.push_back(e);
    }
  }
  for (const auto& [key, pm] : split) {
    const auto [k, t] = key;
    double v = pm.first;
    if (pm.first == 0.0) v = -pm.second;
    if (k == 0) {
      prob.free_objective[static_cast<std::size_t>(t)] = v;
    } else {
      prob.constraints[static_cast<std::size_t>(k - 1)].free_entries.push_back({t, v});
    }
  }
  return prob;
}

std::string export_sdpa_solution(const SdpProblem& prob, const SdpSolution& sol) {
  std::ostringstream os;
  for (Eigen::Index k = 0; k < sol.y.size(); ++k) os << (k ? " " : "") << repr(sol.y(k));
  os << "\n";
  const int nb = static_cast<int>(prob.blocks.size());
  const int nf = prob.free_vars;
  Eigen::VectorXd free_slack = Eigen::VectorXd::Zero(nf);
  for (int t = 0; t < nf && t < static_cast<int>(prob.free_objective.size()); ++t) {
    free_slack(t) = prob.free_objective[static_cast<std::size_t>(t)];
  }
  for (int k = 0; k < prob.num_constraints(); ++k) {
    for (const auto& f : prob.constraints[static_cast<std::size_t>(k)].free_entries) {
      free_slack(f.index) -= f.value * sol.y(k);
    }
  }
  for (int mat = 1; mat <= 2; ++mat) {
    const auto& M = mat == 1 ? sol.Z : sol.X;
    for (int b = 0; b < nb; ++b) {
      const Eigen::MatrixXd& B = M[static_cast<std::size_t>(b)];
      for (Eigen::Index i = 0; i < B.rows(); ++i) {
        for (Eigen::Index j = i; j < B.cols(); ++j) {
          if (B(i, j) == 0.0) continue;
          os << mat << " " << b + 1 << " " << i + 1 << " " << j + 1 << " " << repr(B(i, j)) << "\n";
        }
      }
    }
    for (int t = 0; t < nf; ++t) {
      double plus = 0.0, minus = 0.0;
      if (mat == 1) {
        plus = free_slack(t);
        minus = -free_slack(t);
      } else {
        plus = std::max(sol.u(t), 0.0);
        minus = std::max(-sol.u(t), 0.0);
      }
      if (plus != 0.0) os << mat << " " << nb + 1 << " " << t + 1 << " " << t + 1 << " " << repr(plus) << "\n";
      if (minus != 0.0) {
        os << mat << " " << nb + 1 << " " << nf + t + 1 << " " << nf + t + 1 << " " << repr(minus) << "\n";
      }
    }
  }
  return os.str();
}

SdpSolution import_sdpa_solution(std::string_view text, const SdpProblem& prob,
                                 const SolverSettings& tolerances) {
  prob.validate();
  const int m = prob.num_constraints();
  const int nb = static_cast<int>(prob.blocks.size());
  const int nf = prob.free_vars;
  const int nb_file = nb + (nf > 0 ? 1 : 0);

  // The y vector is the first non-comment line.
  std::size_t pos = 0, line_no = 0;
  std::string first;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    const auto f = line.find_first_not_of(" \t\r");
    if (f == std::string::npos || line[f] == '*' || line[f] == '"') continue;
    first = line;
    break;
  }
  if (first.empty()) throw MalformedResultError("missing y vector", line_no + 1);
  SdpSolution sol;
  {
    std::vector<Token> yt = tokenize(first, nullptr);
    if (static_cast<int>(yt.size()) != m) {
      throw MalformedResultError("y vector has " + std::to_string(yt.size()) + " entries, expected " +
                                     std::to_string(m),
                                 line_no);
    }
    sol.y.resize(m);
    for (int k = 0; k < m; ++k) {
      yt[static_cast<std::size_t>(k)].line = line_no;
      sol.y(k) = number(yt[static_cast<std::size_t>(k)]);
    }
  }
  const std::size_t y_line = line_no;

  for (int b = 0; b < nb; ++b) {
    const int n = prob.blocks[static_cast<std::size_t>(b)];
    sol.X.push_back(Eigen::MatrixXd::Zero(n, n));
    sol.Z.push_back(Eigen::MatrixXd::Zero(n, n));
  }
  Eigen::VectorXd up = Eigen::VectorXd::Zero(nf), um = Eigen::VectorXd::Zero(nf);
  std::vector<Token> toks = tokenize(text.substr(pos), nullptr);
  for (auto& t : toks) t.line += y_line;
  if (toks.size() % 5 != 0) throw MalformedResultError("truncated entry", toks.back().line);
  for (std::size_t p = 0; p < toks.size(); p += 5) {
    const std::size_t line = toks[p].line;
    const int mat = integer(toks[p]);
    const int blk = integer(toks[p + 1]);
    int i = integer(toks[p + 2]);
    int j = integer(toks[p + 3]);
    const double v = number(toks[p + 4]);
    if (mat != 1 && mat != 2) throw MalformedResultError("matrix id must be 1 (Z) or 2 (X)", line);
    if (blk < 1 || blk > nb_file) throw MalformedResultError("block index out of range", line);
    if (i > j) std::swap(i, j);
    if (blk == nb + 1) {
      if (i != j || i < 1 || i > 2 * nf) throw MalformedResultError("bad free-block entry", line);
      if (mat == 2) (i <= nf ? up(i - 1) : um(i - 1 - nf)) = v;
      continue;
    }
    const int n = prob.blocks[static_cast<std::size_t>(blk - 1)];
    if (i < 1 || j > n) throw MalformedResultError("entry index out of range", line);
    Eigen::MatrixXd& M = (mat == 1 ? sol.Z : sol.X)[static_cast<std::size_t>(blk - 1)];
    M(i - 1, j - 1) = v;
    M(j - 1, i - 1) = v;
  }
  sol.u = up - um;

  const KktResiduals r = kkt_residuals(prob, sol);
  sol.primal_infeasibility = r.primal;
  sol.dual_infeasibility = r.dual;
  sol.duality_gap = r.gap;
  sol.primal_objective = r.primal_objective;
  sol.dual_objective = r.dual_objective;
  const double tol = tolerances.feas_tol;
  const bool ok = std::isfinite(r.primal) && std::isfinite(r.dual) && r.primal <= tol &&
                  r.dual <= tol && r.gap <= tolerances.gap_tol && r.min_eig_x >= -tol &&
                  r.min_eig_z >= -tol;
  sol.status = ok ? SdpStatus::kOptimal : SdpStatus::kNumericalFailure;
  return sol;
}

}  // namespace polysafe
