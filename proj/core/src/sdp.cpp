#include "polysafe/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "polysafe/error.hpp"

namespace polysafe {

std::string_view to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::kOptimal:
      return "optimal";
    case SdpStatus::kInfeasiblePrimal:
      return "infeasible-primal";
    case SdpStatus::kInfeasibleDual:
      return "infeasible-dual";
    case SdpStatus::kMaxIters:
      return "max-iters";
    case SdpStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

bool SdpSolution::usable(double feas_tol) const {
  if (status == SdpStatus::kOptimal) return true;
  if (status == SdpStatus::kMaxIters || status == SdpStatus::kNumericalFailure) {
    return primal_infeasibility <= feas_tol && dual_infeasibility <= feas_tol &&
           duality_gap <= std::sqrt(feas_tol);
  }
  return false;
}

void SdpProblem::validate() const {
  auto check_entry = [&](const BlockEntry& e) {
    if (e.block < 0 || e.block >= static_cast<int>(blocks.size())) {
      throw DimensionError("SDP entry references block " +
                           std::to_string(e.block));
    }
    const int n = blocks[static_cast<std::size_t>(e.block)];
    if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n || e.i > e.j) {
      throw DimensionError("SDP entry (" + std::to_string(e.i) + ", " +
                           std::to_string(e.j) + ") invalid for block of size " +
                           std::to_string(n));
    }
    if (!std::isfinite(e.value)) throw DimensionError("non-finite SDP entry");
  };
  for (int n : blocks) {
    if (n <= 0) throw DimensionError("SDP block sizes must be positive");
  }
  for (const auto& e : objective) check_entry(e);
  for (const auto& con : constraints) {
    for (const auto& e : con.entries) check_entry(e);
    for (const auto& f : con.free_entries) {
      if (f.index < 0 || f.index >= free_vars) {
        throw DimensionError("SDP free entry out of range");
      }
    }
    if (!std::isfinite(con.rhs)) throw DimensionError("non-finite SDP rhs");
  }
  if (!free_objective.empty() &&
      free_objective.size() != static_cast<std::size_t>(free_vars)) {
    throw DimensionError("free objective length differs from free_vars");
  }
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Triplet {
  int i;
  int j;
  double v;
};

struct BlockRow {
  int k;
  std::vector<Triplet> entries;
};

// Problem data rearranged for the solver: per block, the constraints that
// touch it.
struct Prepared {
  int m = 0;
  int nf = 0;
  std::vector<int> dims;
  std::vector<std::vector<BlockRow>> rows;
  std::vector<MatrixXd> C;
  MatrixXd B;
  VectorXd b;
  VectorXd c;
  int total_dim = 0;

  explicit Prepared(const SdpProblem& prob) {
    m = prob.num_constraints();
    nf = prob.free_vars;
    dims = prob.blocks;
    rows.resize(dims.size());
    C.resize(dims.size());
    for (std::size_t bi = 0; bi < dims.size(); ++bi) {
      C[bi] = MatrixXd::Zero(dims[bi], dims[bi]);
      total_dim += dims[bi];
    }
    for (const auto& e : prob.objective) {
      C[static_cast<std::size_t>(e.block)](e.i, e.j) += e.value;
      if (e.i != e.j) C[static_cast<std::size_t>(e.block)](e.j, e.i) += e.value;
    }
    B = MatrixXd::Zero(m, nf);
    b = VectorXd::Zero(m);
    c = VectorXd::Zero(nf);
    for (int f = 0; f < nf && !prob.free_objective.empty(); ++f) {
      c(f) = prob.free_objective[static_cast<std::size_t>(f)];
    }
    for (int k = 0; k < m; ++k) {
      const auto& con = prob.constraints[static_cast<std::size_t>(k)];
      b(k) = con.rhs;
      for (const auto& fe : con.free_entries) B(k, fe.index) += fe.value;
      std::vector<std::vector<Triplet>> per_block(dims.size());
      for (const auto& e : con.entries) {
        per_block[static_cast<std::size_t>(e.block)].push_back({e.i, e.j, e.value});
      }
      for (std::size_t bi = 0; bi < dims.size(); ++bi) {
        if (!per_block[bi].empty()) {
          rows[bi].push_back(BlockRow{k, std::move(per_block[bi])});
        }
      }
    }
  }

  VectorXd apply(const std::vector<MatrixXd>& X) const {
    VectorXd out = VectorXd::Zero(m);
    for (std::size_t bi = 0; bi < dims.size(); ++bi) {
      for (const auto& row : rows[bi]) {
        double s = 0.0;
        for (const auto& t : row.entries) {
          s += (t.i == t.j ? t.v : 2.0 * t.v) * X[bi](t.i, t.j);
        }
        out(row.k) += s;
      }
    }
    return out;
  }

  std::vector<MatrixXd> adjoint(const VectorXd& y) const {
    std::vector<MatrixXd> out(dims.size());
    for (std::size_t bi = 0; bi < dims.size(); ++bi) {
      out[bi] = MatrixXd::Zero(dims[bi], dims[bi]);
      for (const auto& row : rows[bi]) {
        const double yk = y(row.k);
        if (yk == 0.0) continue;
        for (const auto& t : row.entries) {
          out[bi](t.i, t.j) += yk * t.v;
          if (t.i != t.j) out[bi](t.j, t.i) += yk * t.v;
        }
      }
    }
    return out;
  }
};

double inner(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i]).sum();
  return s;
}

// Largest alpha with diag(lambda) + alpha * dM PSD (infinity when
// unbounded).
double max_scaled_step(const VectorXd& lambda, const MatrixXd& dM) {
  const VectorXd r = lambda.array().rsqrt();
  MatrixXd S = r.asDiagonal() * dM * r.asDiagonal();
  S = 0.5 * (S + S.transpose());
  const double lambda_min =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(S, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .minCoeff();
  if (lambda_min >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lambda_min;
}

struct Scaling {
  MatrixXd W;     // W Z W = X
  MatrixXd G;     // W = G G'
  VectorXd lambda;
};

bool nt_scaling(const MatrixXd& X, const MatrixXd& Z, Scaling& out) {
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return false;
  const MatrixXd L = llt.matrixL();
  MatrixXd S = L.transpose() * Z * L;
  S = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S);
  if (eig.info() != Eigen::Success) return false;
  VectorXd d = eig.eigenvalues();
  if (d.minCoeff() <= 0.0 || !d.allFinite()) return false;
  const MatrixXd& U = eig.eigenvectors();
  const VectorXd d_quarter = d.array().pow(0.25);
  out.G = L * U * d_quarter.cwiseInverse().asDiagonal();
  out.W = out.G * out.G.transpose();
  out.W = 0.5 * (out.W + out.W.transpose());
  out.lambda = d.array().sqrt();
  return true;
}

struct Iterate {
  std::vector<MatrixXd> X;
  std::vector<MatrixXd> Z;
  VectorXd y;
  VectorXd u;
  double tau = 1.0;
  double kappa = 1.0;
};

struct Measures {
  double pobj = 0.0;
  double dobj = 0.0;
  double pinf = 0.0;
  double dinf = 0.0;
  double gap = 0.0;
};

}  // namespace

namespace {

SdpSolution solve_reduced(const SdpProblem& prob, const SolverSettings& settings);

bool is_empty_row(const SdpConstraint& con) {
  const auto zero_block = [](const BlockEntry& e) { return e.value == 0.0; };
  const auto zero_free = [](const FreeEntry& e) { return e.value == 0.0; };
  return std::all_of(con.entries.begin(), con.entries.end(), zero_block) &&
         std::all_of(con.free_entries.begin(), con.free_entries.end(), zero_free);
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& prob, const SolverSettings& settings) {
  prob.validate();
  // Constraints without data are either trivially satisfied or prove
  // infeasibility on their own; the interior-point system cannot carry them.
  std::vector<int> kept;
  for (int k = 0; k < prob.num_constraints(); ++k) {
    const auto& con = prob.constraints[static_cast<std::size_t>(k)];
    if (!is_empty_row(con)) {
      kept.push_back(k);
      continue;
    }
    if (con.rhs != 0.0) {
      SdpSolution sol;
      sol.status = SdpStatus::kInfeasiblePrimal;
      for (int n : prob.blocks) {
        sol.X.push_back(MatrixXd::Zero(n, n));
        sol.Z.push_back(MatrixXd::Zero(n, n));
      }
      sol.y = VectorXd::Zero(prob.num_constraints());
      sol.y(k) = con.rhs > 0 ? 1.0 : -1.0;
      sol.u = VectorXd::Zero(prob.free_vars);
      sol.primal_infeasibility = std::abs(con.rhs);
      return sol;
    }
  }
  // Free variables that appear in no constraint are fixed at zero, or make
  // the objective unbounded when they carry cost.
  std::vector<bool> used(static_cast<std::size_t>(prob.free_vars), false);
  for (const auto& con : prob.constraints) {
    for (const auto& f : con.free_entries) {
      if (f.value != 0.0) used[static_cast<std::size_t>(f.index)] = true;
    }
  }
  std::vector<int> free_map(static_cast<std::size_t>(prob.free_vars), -1);
  int free_kept = 0;
  for (int f = 0; f < prob.free_vars; ++f) {
    if (used[static_cast<std::size_t>(f)]) {
      free_map[static_cast<std::size_t>(f)] = free_kept++;
      continue;
    }
    const double cost = prob.free_objective.empty()
                            ? 0.0
                            : prob.free_objective[static_cast<std::size_t>(f)];
    if (cost != 0.0) {
      SdpSolution sol;
      sol.status = SdpStatus::kInfeasibleDual;
      for (int n : prob.blocks) {
        sol.X.push_back(MatrixXd::Zero(n, n));
        sol.Z.push_back(MatrixXd::Zero(n, n));
      }
      sol.y = VectorXd::Zero(prob.num_constraints());
      sol.u = VectorXd::Zero(prob.free_vars);
      sol.u(f) = cost > 0 ? -1.0 : 1.0;
      return sol;
    }
  }
  if (static_cast<int>(kept.size()) == prob.num_constraints() &&
      free_kept == prob.free_vars) {
    return solve_reduced(prob, settings);
  }
  SdpProblem reduced;
  reduced.blocks = prob.blocks;
  reduced.objective = prob.objective;
  reduced.free_vars = free_kept;
  if (!prob.free_objective.empty()) {
    reduced.free_objective.assign(static_cast<std::size_t>(free_kept), 0.0);
    for (int f = 0; f < prob.free_vars; ++f) {
      const int g = free_map[static_cast<std::size_t>(f)];
      if (g >= 0) {
        reduced.free_objective[static_cast<std::size_t>(g)] =
            prob.free_objective[static_cast<std::size_t>(f)];
      }
    }
  }
  for (int k : kept) {
    SdpConstraint con = prob.constraints[static_cast<std::size_t>(k)];
    std::vector<FreeEntry> fe;
    for (const auto& f : con.free_entries) {
      const int g = free_map[static_cast<std::size_t>(f.index)];
      if (g >= 0 && f.value != 0.0) fe.push_back({g, f.value});
    }
    con.free_entries = std::move(fe);
    reduced.constraints.push_back(std::move(con));
  }
  SdpSolution sol = solve_reduced(reduced, settings);
  VectorXd y = VectorXd::Zero(prob.num_constraints());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    y(kept[i]) = sol.y(static_cast<Index>(i));
  }
  sol.y = std::move(y);
  VectorXd u = VectorXd::Zero(prob.free_vars);
  for (int f = 0; f < prob.free_vars; ++f) {
    const int g = free_map[static_cast<std::size_t>(f)];
    if (g >= 0 && sol.u.size() > g) u(f) = sol.u(g);
  }
  sol.u = std::move(u);
  return sol;
}

namespace {

SdpSolution solve_reduced(const SdpProblem& prob, const SolverSettings& settings) {
  const Prepared P(prob);
  const int m = P.m;
  const int nf = P.nf;
  const std::size_t nb = P.dims.size();
  const double norm_b = P.b.norm();
  const double norm_C = std::sqrt(
      [&] {
        double s = 0;
        for (const auto& c : P.C) s += c.squaredNorm();
        return s;
      }() +
      P.c.squaredNorm());

  Iterate it;
  it.X.resize(nb);
  it.Z.resize(nb);
  for (std::size_t bi = 0; bi < nb; ++bi) {
    it.X[bi] = MatrixXd::Identity(P.dims[bi], P.dims[bi]);
    it.Z[bi] = MatrixXd::Identity(P.dims[bi], P.dims[bi]);
  }
  it.y = VectorXd::Zero(m);
  it.u = VectorXd::Zero(nf);

  SdpSolution best;
  double best_score = std::numeric_limits<double>::infinity();
  auto package = [&](const Iterate& cur, const Measures& ms, SdpStatus status,
                     int iters, bool normalize) {
    SdpSolution sol;
    const double s = normalize ? 1.0 / cur.tau : 1.0;
    sol.X.resize(nb);
    sol.Z.resize(nb);
    for (std::size_t bi = 0; bi < nb; ++bi) {
      sol.X[bi] = cur.X[bi] * s;
      sol.Z[bi] = cur.Z[bi] * s;
    }
    sol.y = cur.y * s;
    sol.u = cur.u * s;
    sol.status = status;
    sol.primal_objective = ms.pobj;
    sol.dual_objective = ms.dobj;
    sol.duality_gap = ms.gap;
    sol.primal_infeasibility = ms.pinf;
    sol.dual_infeasibility = ms.dinf;
    sol.iterations = iters;
    return sol;
  };

  const double n_cone = static_cast<double>(P.total_dim) + 1.0;
  int stalled = 0;

  for (int iter = 0; iter <= settings.max_iters; ++iter) {
    // Residuals of the embedding.
    const VectorXd AX = P.apply(it.X);
    const VectorXd r_p = P.b * it.tau - AX - P.B * it.u;
    const std::vector<MatrixXd> ATy = P.adjoint(it.y);
    std::vector<MatrixXd> R_d(nb);
    for (std::size_t bi = 0; bi < nb; ++bi) {
      R_d[bi] = P.C[bi] * it.tau - ATy[bi] - it.Z[bi];
    }
    const VectorXd r_f = P.c * it.tau - P.B.transpose() * it.y;
    const double CX = inner(P.C, it.X) + P.c.dot(it.u);
    const double by = P.b.dot(it.y);
    const double r_g = it.kappa - by + CX;
    const double mu = (inner(it.X, it.Z) + it.tau * it.kappa) / n_cone;

    Measures ms;
    ms.pobj = CX / it.tau;
    ms.dobj = by / it.tau;
    ms.pinf = r_p.norm() / (it.tau * (1.0 + norm_b));
    ms.dinf = std::sqrt(inner(R_d, R_d) + r_f.squaredNorm()) /
              (it.tau * (1.0 + norm_C));
    ms.gap = std::abs(ms.pobj - ms.dobj) /
             (1.0 + std::abs(ms.pobj) + std::abs(ms.dobj));

    if (settings.verbose) {
      std::cerr << std::scientific << std::setprecision(3) << "iter " << iter
                << " pobj " << ms.pobj << " dobj " << ms.dobj << " pinf "
                << ms.pinf << " dinf " << ms.dinf << " gap " << ms.gap
                << " tau " << it.tau << " kappa " << it.kappa << " mu " << mu
                << "\n";
    }

    if (!std::isfinite(mu) || !std::isfinite(ms.pinf) || !std::isfinite(ms.dinf)) {
      if (best.X.empty()) best = package(it, ms, SdpStatus::kNumericalFailure, iter, true);
      best.status = SdpStatus::kNumericalFailure;
      return best;
    }
    if (ms.pinf <= settings.feas_tol && ms.dinf <= settings.feas_tol &&
        ms.gap <= settings.gap_tol) {
      return package(it, ms, SdpStatus::kOptimal, iter, true);
    }
    const double score = std::max({ms.pinf, ms.dinf, ms.gap});
    if (score < best_score) {
      best_score = score;
      best = package(it, ms, SdpStatus::kMaxIters, iter, true);
    }

    // Infeasibility certificates.
    if (by > 0.0) {
      std::vector<MatrixXd> cert(nb);
      for (std::size_t bi = 0; bi < nb; ++bi) cert[bi] = ATy[bi] + it.Z[bi];
      const double res =
          std::sqrt(inner(cert, cert) + (P.B.transpose() * it.y).squaredNorm()) /
          by;
      if (res <= settings.feas_tol && it.tau < it.kappa) {
        return package(it, ms, SdpStatus::kInfeasiblePrimal, iter, false);
      }
    }
    if (CX < 0.0) {
      const double res = (AX + P.B * it.u).norm() / -CX;
      if (res <= settings.feas_tol && it.tau < it.kappa) {
        return package(it, ms, SdpStatus::kInfeasibleDual, iter, false);
      }
    }
    if (iter == settings.max_iters) break;

    // Scaling and Schur complement.
    std::vector<Scaling> sc(nb);
    bool ok = true;
    for (std::size_t bi = 0; bi < nb && ok; ++bi) {
      ok = nt_scaling(it.X[bi], it.Z[bi], sc[bi]);
    }
    if (!ok) {
      best.status = SdpStatus::kNumericalFailure;
      return best;
    }

    MatrixXd M = MatrixXd::Zero(m, m);
    std::vector<MatrixXd> WCW(nb), WRW(nb);
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const MatrixXd& W = sc[bi].W;
      WCW[bi] = W * P.C[bi] * W;
      WRW[bi] = W * R_d[bi] * W;
      const auto& rows = P.rows[bi];
      MatrixXd T(P.dims[bi], P.dims[bi]);
      for (std::size_t li = 0; li < rows.size(); ++li) {
        T.setZero();
        for (const auto& t : rows[li].entries) {
          if (t.i == t.j) {
            T.noalias() += t.v * W.col(t.i) * W.row(t.i);
          } else {
            T.noalias() += t.v * W.col(t.i) * W.row(t.j);
            T.noalias() += t.v * W.col(t.j) * W.row(t.i);
          }
        }
        const int l = rows[li].k;
        for (std::size_t ki = 0; ki <= li; ++ki) {
          double s = 0.0;
          for (const auto& t : rows[ki].entries) {
            s += (t.i == t.j ? t.v : 2.0 * t.v) * T(t.i, t.j);
          }
          const int k = rows[ki].k;
          M(k, l) += s;
          if (k != l) M(l, k) += s;
        }
      }
    }
    const VectorXd d = P.apply(WCW);
    const double cwc = inner(P.C, WCW);
    const VectorXd a_wr = P.apply(WRW);
    const double c_wr = inner(P.C, WRW);

    const int N = m + nf + 1;
    MatrixXd K = MatrixXd::Zero(N, N);
    K.topLeftCorner(m, m) = M;
    K.block(0, m, m, nf) = P.B;
    K.block(0, N - 1, m, 1) = -(P.b + d);
    K.block(m, 0, nf, m) = P.B.transpose();
    K.block(m, N - 1, nf, 1) = -P.c;
    K.block(N - 1, 0, 1, m) = (d - P.b).transpose();
    K.block(N - 1, m, 1, nf) = P.c.transpose();
    K(N - 1, N - 1) = -(cwc + it.kappa / it.tau);
    Eigen::PartialPivLU<MatrixXd> lu(K);

    struct Direction {
      std::vector<MatrixXd> dX, dZ;
      std::vector<MatrixXd> dXs, dZs;  // in the NT-scaled space
      VectorXd dy, du;
      double dtau = 0, dkappa = 0;
    };

    // Solves the Newton system for complementarity target Mc (scaled
    // space, one per block) and tau-kappa target rhs_tau.
    auto solve_direction = [&](double eta, const std::vector<MatrixXd>& Mc,
                               double rhs_tau, Direction& dir) -> bool {
      std::vector<MatrixXd> GMG(nb);
      for (std::size_t bi = 0; bi < nb; ++bi) {
        GMG[bi] = sc[bi].G * Mc[bi] * sc[bi].G.transpose();
        GMG[bi] = 0.5 * (GMG[bi] + GMG[bi].transpose());
      }
      VectorXd rhs(N);
      rhs.head(m) = eta * r_p - P.apply(GMG) + eta * a_wr;
      rhs.segment(m, nf) = eta * r_f;
      rhs(N - 1) = -eta * r_g - rhs_tau / it.tau - inner(P.C, GMG) + eta * c_wr;
      VectorXd sol = lu.solve(rhs);
      if (!sol.allFinite()) return false;
      dir.dX.resize(nb);
      dir.dZ.resize(nb);
      dir.dXs.resize(nb);
      dir.dZs.resize(nb);
      auto recover = [&] {
        dir.dy = sol.head(m);
        dir.du = sol.segment(m, nf);
        dir.dtau = sol(N - 1);
        dir.dkappa = (rhs_tau - it.kappa * dir.dtau) / it.tau;
        const auto ATdy = P.adjoint(dir.dy);
        for (std::size_t bi = 0; bi < nb; ++bi) {
          dir.dZ[bi] = eta * R_d[bi] - ATdy[bi] + P.C[bi] * dir.dtau;
          // dXs + dZs = Mc holds exactly in the scaled space.
          dir.dZs[bi] = sc[bi].G.transpose() * dir.dZ[bi] * sc[bi].G;
          dir.dZs[bi] = 0.5 * (dir.dZs[bi] + dir.dZs[bi].transpose());
          dir.dXs[bi] = Mc[bi] - dir.dZs[bi];
          dir.dX[bi] = sc[bi].G * dir.dXs[bi] * sc[bi].G.transpose();
          dir.dX[bi] = 0.5 * (dir.dX[bi] + dir.dX[bi].transpose());
        }
      };
      recover();
      // Iterative refinement against the unreduced Newton equations; the
      // Schur complement loses accuracy as mu -> 0.
      for (int pass = 0; pass < settings.refinement_steps; ++pass) {
        VectorXd res(N);
        res.head(m) = eta * r_p -
                      (P.apply(dir.dX) + P.B * dir.du - P.b * dir.dtau);
        res.segment(m, nf) =
            eta * r_f - (P.B.transpose() * dir.dy - P.c * dir.dtau);
        res(N - 1) = -eta * r_g - (dir.dkappa - P.b.dot(dir.dy) +
                                   inner(P.C, dir.dX) + P.c.dot(dir.du));
        if (res.norm() <= 1e-15 * (1.0 + rhs.norm())) break;
        const VectorXd corr = lu.solve(res);
        if (!corr.allFinite()) break;
        sol += corr;
        recover();
      }
      return true;
    };

    auto step_length = [&](const Direction& dir) {
      double alpha = std::numeric_limits<double>::infinity();
      for (std::size_t bi = 0; bi < nb; ++bi) {
        alpha = std::min(alpha, max_scaled_step(sc[bi].lambda, dir.dXs[bi]));
        alpha = std::min(alpha, max_scaled_step(sc[bi].lambda, dir.dZs[bi]));
      }
      if (dir.dtau < 0) alpha = std::min(alpha, -it.tau / dir.dtau);
      if (dir.dkappa < 0) alpha = std::min(alpha, -it.kappa / dir.dkappa);
      return alpha;
    };

    // Predictor.
    std::vector<MatrixXd> Mc(nb);
    for (std::size_t bi = 0; bi < nb; ++bi) {
      Mc[bi] = -MatrixXd(sc[bi].lambda.asDiagonal());
    }
    Direction aff;
    if (!solve_direction(1.0, Mc, -it.tau * it.kappa, aff)) {
      best.status = SdpStatus::kNumericalFailure;
      return best;
    }
    const double alpha_aff = std::min(1.0, step_length(aff));
    double mu_aff = 0.0;
    for (std::size_t bi = 0; bi < nb; ++bi) {
      mu_aff += ((it.X[bi] + alpha_aff * aff.dX[bi])
                     .cwiseProduct(it.Z[bi] + alpha_aff * aff.dZ[bi]))
                    .sum();
    }
    mu_aff += (it.tau + alpha_aff * aff.dtau) * (it.kappa + alpha_aff * aff.dkappa);
    mu_aff /= n_cone;
    double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector.
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const Scaling& s = sc[bi];
      const MatrixXd& dXs = aff.dXs[bi];
      const MatrixXd& dZs = aff.dZs[bi];
      MatrixXd R = -0.5 * (dXs * dZs + dZs * dXs);
      for (Index i = 0; i < R.rows(); ++i) {
        R(i, i) += sigma * mu - s.lambda(i) * s.lambda(i);
      }
      MatrixXd Mb(R.rows(), R.cols());
      for (Index i = 0; i < R.rows(); ++i) {
        for (Index j = 0; j < R.cols(); ++j) {
          Mb(i, j) = 2.0 * R(i, j) / (s.lambda(i) + s.lambda(j));
        }
      }
      Mc[bi] = Mb;
    }
    Direction dir;
    const double rhs_tau =
        sigma * mu - it.tau * it.kappa - aff.dtau * aff.dkappa;
    if (!solve_direction(1.0 - sigma, Mc, rhs_tau, dir)) {
      best.status = SdpStatus::kNumericalFailure;
      return best;
    }
    const double alpha_max = step_length(dir);
    const double alpha = std::min(1.0, settings.step_fraction * alpha_max);
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      best.status = SdpStatus::kNumericalFailure;
      return best;
    }
    stalled = alpha < 1e-9 ? stalled + 1 : 0;
    if (stalled >= 5) {
      best.status = SdpStatus::kNumericalFailure;
      return best;
    }

    for (std::size_t bi = 0; bi < nb; ++bi) {
      it.X[bi] += alpha * dir.dX[bi];
      it.Z[bi] += alpha * dir.dZ[bi];
      it.X[bi] = 0.5 * (it.X[bi] + it.X[bi].transpose());
      it.Z[bi] = 0.5 * (it.Z[bi] + it.Z[bi].transpose());
    }
    it.y += alpha * dir.dy;
    it.u += alpha * dir.du;
    it.tau += alpha * dir.dtau;
    it.kappa += alpha * dir.dkappa;
  }

  best.status = SdpStatus::kMaxIters;
  return best;
}

}  // namespace

KktResiduals kkt_residuals(const SdpProblem& prob, const SdpSolution& sol) {
  const Prepared P(prob);
  const std::size_t nb = P.dims.size();
  if (sol.X.size() != nb || sol.Z.size() != nb ||
      sol.y.size() != P.m || sol.u.size() != P.nf) {
    throw DimensionError("solution shape does not match the problem");
  }
  KktResiduals out;
  const VectorXd rp = P.apply(sol.X) + P.B * sol.u - P.b;
  out.primal = rp.norm() / (1.0 + P.b.norm());
  const auto ATy = P.adjoint(sol.y);
  double dres = 0.0, cnorm = 0.0;
  for (std::size_t bi = 0; bi < nb; ++bi) {
    dres += (P.C[bi] - ATy[bi] - sol.Z[bi]).squaredNorm();
    cnorm += P.C[bi].squaredNorm();
  }
  dres += (P.c - P.B.transpose() * sol.y).squaredNorm();
  cnorm += P.c.squaredNorm();
  out.dual = std::sqrt(dres) / (1.0 + std::sqrt(cnorm));
  out.primal_objective = inner(P.C, sol.X) + P.c.dot(sol.u);
  out.dual_objective = P.b.dot(sol.y);
  out.gap = std::abs(out.primal_objective - out.dual_objective) /
            (1.0 + std::abs(out.primal_objective) + std::abs(out.dual_objective));
  out.min_eig_x = std::numeric_limits<double>::infinity();
  out.min_eig_z = std::numeric_limits<double>::infinity();
  for (std::size_t bi = 0; bi < nb; ++bi) {
    out.min_eig_x = std::min(
        out.min_eig_x,
        Eigen::SelfAdjointEigenSolver<MatrixXd>(sol.X[bi], Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff());
    out.min_eig_z = std::min(
        out.min_eig_z,
        Eigen::SelfAdjointEigenSolver<MatrixXd>(sol.Z[bi], Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff());
  }
  return out;
}

}  // namespace polysafe
