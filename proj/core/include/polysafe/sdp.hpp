#pragma once

// Block-diagonal semidefinite programs in standard primal form
//
//   min  <C, X> + c'u
//   s.t. <A_k, X> + B_k u = b_k,   k = 1..m
//        X = diag(X_1, ..., X_p) PSD,  u free,
//
// and a homogeneous self-dual interior-point solver for them.

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace polysafe {

/// Symmetric-matrix entry; (i, j) with i <= j stands for both (i, j) and
/// (j, i).
struct BlockEntry {
  int block = 0;
  int i = 0;
  int j = 0;
  double value = 0.0;
};

struct FreeEntry {
  int index = 0;
  double value = 0.0;
};

struct SdpConstraint {
  std::vector<BlockEntry> entries;
  std::vector<FreeEntry> free_entries;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<int> blocks;
  std::vector<BlockEntry> objective;
  std::vector<SdpConstraint> constraints;
  int free_vars = 0;
  std::vector<double> free_objective;  // size free_vars (may be empty = 0)

  int num_constraints() const { return static_cast<int>(constraints.size()); }
  /// Throws DimensionError on out-of-range indices or i > j entries.
  void validate() const;
};

enum class SdpStatus {
  kOptimal,
  kInfeasiblePrimal,
  kInfeasibleDual,
  kMaxIters,
  kNumericalFailure,
};

std::string_view to_string(SdpStatus status);

struct SdpSolution {
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::MatrixXd> Z;
  Eigen::VectorXd y;
  Eigen::VectorXd u;
  SdpStatus status = SdpStatus::kNumericalFailure;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double duality_gap = 0.0;  // relative
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;

  /// Optimal, or stopped early with small residuals.
  bool usable(double feas_tol = 1e-6) const;
};

struct SolverSettings {
  int max_iters = 100;
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  /// Fraction of the distance to the cone boundary taken per step.
  double step_fraction = 0.95;
  /// Refinement passes on each Newton solve.
  int refinement_steps = 2;
  bool verbose = false;
};

/// Primal-dual interior-point method on the homogeneous self-dual
/// embedding with Nesterov-Todd scaling and Mehrotra predictor-corrector.
/// Never throws for numerical trouble; the status says what happened.
SdpSolution solve_sdp(const SdpProblem& prob, const SolverSettings& settings = {});

/// Residuals of a candidate solution, measured the same way the solver
/// measures them at termination.
struct KktResiduals {
  double primal = 0.0;  // ||A(X) + Bu - b|| / (1 + ||b||)
  double dual = 0.0;    // ||C - A'y - Z|| + ||c - B'y|| relative
  double gap = 0.0;     // |pobj - dobj| / (1 + |pobj| + |dobj|)
  double min_eig_x = 0.0;
  double min_eig_z = 0.0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
};

KktResiduals kkt_residuals(const SdpProblem& prob, const SdpSolution& sol);

}  // namespace polysafe
