#pragma once

// RK4 simulation of the closed loop under admissible piecewise-constant
// attacks, attack generators, and trajectory ensembles.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polysafe/problem.hpp"

namespace polysafe {

/// Closed-loop right-hand side f + g * (h_s o xs_map), compiled.
class ClosedLoop {
 public:
  ClosedLoop(const SafetyProblem& prob, const std::optional<std::vector<Polynomial>>& h_s);
  Eigen::VectorXd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& a) const;
  const std::vector<Polynomial>& field() const { return field_; }

 private:
  std::vector<Polynomial> field_;
  std::vector<CompiledPolynomial> compiled_;
  std::size_t n_ = 0;
  std::size_t k_ = 0;
};

/// Attack value for the step starting at (t, x); projected onto the
/// admissible set by the simulator.
using AttackGenerator =
    std::function<Eigen::VectorXd(int step, double t, const Eigen::VectorXd& x)>;

AttackGenerator zero_attack(const SafetyProblem& prob);
AttackGenerator constant_attack(const Eigen::VectorXd& a);
/// Uniform values in [-a_max, a_max]^k, redrawn every `hold_steps` steps.
AttackGenerator random_attack(const SafetyProblem& prob, std::uint64_t seed, double a_max = 1.0,
                              int hold_steps = 20);

struct GreedyOptions {
  int grid = 21;
  double a_max = 1.0;
  /// Called once when the declared attack set is unbounded and only the
  /// box keeps the search finite.
  std::function<void(const std::string&)> on_warning;
};

/// Picks, on a grid of {A(x, a) >= 0} within [-a_max, a_max]^k, the attack
/// maximizing dV/dx * f~(x, a); ties go to the smallest grid index. Throws
/// EmptyAdmissibleSetError when no grid point is admissible.
AttackGenerator greedy_attack(const SafetyProblem& prob, const Polynomial& V,
                              const std::optional<std::vector<Polynomial>>& h_s,
                              const GreedyOptions& opts = {});

/// Scales a toward the origin until A(x, a) >= 0. Throws
/// EmptyAdmissibleSetError when even a = 0 is inadmissible.
Eigen::VectorXd project_attack(const CompiledPolynomial& A, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& a);

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  /// attacks[i] acts on [times[i], times[i+1]); the last one repeats the
  /// previous value.
  std::vector<Eigen::VectorXd> attacks;
  double min_s = 0.0;
  std::optional<double> max_V;
  bool blew_up = false;
};

struct SimulationOptions {
  double T = 10.0;
  double dt = 0.01;
  double blowup_norm = 1e6;
  /// Tracked along the path when set.
  std::optional<Polynomial> V;
};

Trajectory simulate(const SafetyProblem& prob, const std::optional<std::vector<Polynomial>>& h_s,
                    const AttackGenerator& gen, const Eigen::VectorXd& x0,
                    const SimulationOptions& opts = {});

enum class AttackMode { kZero, kRandom, kGreedy, kMixed };

struct ReachOptions {
  int n_traj = 500;
  SimulationOptions sim;
  AttackMode mode = AttackMode::kRandom;
  std::uint64_t seed = 1;
  double a_max = 1.0;
  int hold_steps = 20;
  int greedy_grid = 21;
  std::function<void(const std::string&)> on_warning;
};

struct ReachCloud {
  std::vector<Trajectory> trajectories;
  std::size_t points = 0;
  double fraction_in_S = 0.0;
  /// Fraction with V <= 1 + slack (1 when no V was given).
  double fraction_in_V = 0.0;
  double min_s = 0.0;
  std::optional<double> max_V;
  bool any_blowup = false;
};

/// n_traj runs from initial states sampled in T; in mixed mode even indices
/// use the greedy adversary (which needs sim.V) and odd ones random attacks.
ReachCloud reach_cloud(const SafetyProblem& prob, const std::optional<std::vector<Polynomial>>& h_s,
                       const ReachOptions& opts, double V_slack = 1e-3);

/// `t,x1..xn,a1..am,s,V` rows (V column empty without V).
std::string trajectory_csv(const SafetyProblem& prob, const Trajectory& traj,
                           const std::optional<Polynomial>& V, bool header = true);
/// All trajectories, each row prefixed with its index (`traj,t,...`).
std::string cloud_csv(const SafetyProblem& prob, const ReachCloud& cloud,
                      const std::optional<Polynomial>& V);
/// One row per trajectory: `traj,min_s,max_V,blew_up`.
std::string cloud_summary_csv(const ReachCloud& cloud);

}  // namespace polysafe
