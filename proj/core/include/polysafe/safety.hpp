#pragma once

// S-procedure safety conditions, the slack-epsilon alternating search for
// certificates and secondary controllers, gamma bisection and the
// minimum-volume ellipsoid refinement.
//
// With V in R[x], multipliers l1, l2, l5 in SOS[x], l3 in R[x,a], l4 in
// SOS[x,a] and closed-loop field F = f + g * (h_s o xs_map):
//   cond1: s + gamma - l1 (1 - V)              SOS in x
//   cond2: 1 - V - l2 T                         SOS in x
//   cond3: -dV/dx F + eps - l3 (V - 1) - l4 A   SOS in (x, a)
//   cond4: 1 - x'Px - l5 (1 - V)                SOS in x   (ellipsoid only)

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polysafe/problem.hpp"
#include "polysafe/sdp.hpp"
#include "polysafe/sos.hpp"

namespace polysafe {

struct DegreeConfig {
  int deg_V = 2;
  int deg_hs = 3;
  /// Degrees of lambda1 .. lambda5.
  std::array<int, 5> deg_lambda{2, 2, 2, 2, 2};
  /// Extra attempts, each raising every degree by 2, after a failure.
  int max_degree_escalation = 0;
  /// Escalation never raises a degree above this (negative: no cap).
  int degree_cap = -1;

  /// Throws MisconfigurationError on negative or odd deg_V degrees.
  void validate() const;
  DegreeConfig escalated(int level) const;
};

enum class Phase { kMultiplier, kV, kEllipsoidMultiplier, kEllipsoidV, kComplete };
std::string_view to_string(Phase phase);

struct TraceRecord {
  int round = 0;
  Phase phase = Phase::kMultiplier;
  /// Degree escalation level the record belongs to.
  int level = 0;
  /// epsilon for slack phases, -log det P for ellipsoid phases.
  double value = 0.0;
  SdpStatus status = SdpStatus::kOptimal;
  int iterations = 0;
  /// False when the phase result was discarded (failed solve or worse than
  /// the incumbent).
  bool accepted = true;
  double wall_seconds = 0.0;
};

struct AlternationTrace {
  std::vector<TraceRecord> records;
  /// Accepted values never increase by more than tol within one level.
  bool non_increasing(double tol = 1e-8) const;
};

struct Certificate {
  Variables state_vars;
  Variables attack_vars;
  Variables measurement_vars;
  Polynomial V;
  Polynomial lambda1;
  Polynomial lambda2;
  Polynomial lambda3;
  Polynomial lambda4;
  std::optional<Polynomial> lambda5;
  /// One polynomial in measurement_vars per secondary input.
  std::optional<std::vector<Polynomial>> h_s;
  std::optional<Eigen::MatrixXd> P;
  double epsilon = 0.0;
  double gamma = 0.0;
  /// Gram decompositions keyed "cond1".."cond4", "lambda1", "lambda2",
  /// "lambda4", "lambda5".
  std::map<std::string, GramDecomposition> grams;
  AlternationTrace trace;

  bool valid() const { return epsilon <= 0.0; }
};

/// Which side of each bilinear pair is fixed in a phase; unset members are
/// decisions.
struct PhaseSpec {
  std::optional<Polynomial> V;
  std::optional<Polynomial> lambda1;
  std::optional<Polynomial> lambda3;
  std::optional<Polynomial> lambda5;
  /// Secondary controller: absent for primary-only analysis.
  bool synthesize = false;
  std::optional<std::vector<Polynomial>> h_s;
  /// Slack on: epsilon is a decision bounded below by -1e3 and minimized.
  /// Slack off: epsilon is the constant fixed_epsilon.
  bool slack = true;
  double fixed_epsilon = 0.0;
  double gamma = 0.0;
  /// Adds cond4 with P = delta I + M, M PSD, and maximizes <weight, P>.
  bool ellipsoid = false;
  Eigen::MatrixXd ellipsoid_weight;
};

struct PhaseProgram {
  SosProgram program;
  PhaseSpec spec;
  bool has_epsilon = false;
};

/// Emits the conditions for a phase. Throws MisconfigurationError when V and
/// a multiplier it pairs with are both decisions.
PhaseProgram build_phase_program(const SafetyProblem& prob, const DegreeConfig& cfg,
                                 const PhaseSpec& spec);

/// Verification (primary loop only, the input map is ignored).
PhaseProgram build_verification_program(const SafetyProblem& prob,
                                        const DegreeConfig& cfg, PhaseSpec spec);
/// Synthesis: h_s joins the multiplier phase; with a zero input map this
/// reduces to the verification program.
PhaseProgram build_synthesis_program(const SafetyProblem& prob,
                                     const DegreeConfig& cfg, PhaseSpec spec);

struct PhaseResult {
  SdpStatus status = SdpStatus::kNumericalFailure;
  bool usable = false;
  int iterations = 0;
  double wall_seconds = 0.0;
  /// Complete certificate (fixed members copied from the spec).
  Certificate certificate;
};

/// Turns an SDP solution of the compiled phase into a certificate.
PhaseResult lift_phase(const SafetyProblem& prob, const PhaseProgram& phase,
                       const CompiledSos& compiled, const SdpSolution& sol);

/// Compiles, solves and lifts one phase.
PhaseResult solve_phase(const SafetyProblem& prob, const DegreeConfig& cfg,
                        const PhaseSpec& spec, const SolverSettings& settings);

/// Default initial V: |x|^2 / r^2 with r halfway between the sampled outer
/// radius of the initial set and the inscribed radius of {s + gamma >= 0}.
Polynomial default_initial_V(const SafetyProblem& prob, double gamma = 0.0);

enum class RunStatus { kCertified, kNotCertified, kSolverFailure };
std::string_view to_string(RunStatus status);

struct AlternationOptions {
  int max_rounds = 30;
  double gamma = 0.0;
  /// Improvement below this over `stall_rounds` rounds ends a level.
  double stall_tol = 1e-6;
  int stall_rounds = 3;
  SolverSettings solver;
  /// Called after every phase (for logging).
  std::function<void(const TraceRecord&)> on_record;
};

struct AlternationResult {
  RunStatus status = RunStatus::kNotCertified;
  /// Best certificate found (epsilon > 0 when not certified).
  Certificate certificate;
  DegreeConfig degrees;
};

AlternationResult alternating_verify(const SafetyProblem& prob, const DegreeConfig& cfg,
                                     const std::optional<Polynomial>& initial_V,
                                     const AlternationOptions& opts = {});

AlternationResult alternating_synthesize(const SafetyProblem& prob,
                                         const DegreeConfig& cfg,
                                         const std::optional<Polynomial>& initial_V,
                                         const AlternationOptions& opts = {});

struct GammaResult {
  double gamma = 0.0;
  bool found = false;
  AlternationResult best;
  /// Every probe in order: (gamma, status).
  std::vector<std::pair<double, RunStatus>> probes;
};

/// Bisection over gamma >= 0 down to `tol`; each probe runs
/// alternating_verify from the default initializer.
GammaResult minimize_gamma(const SafetyProblem& prob, const DegreeConfig& cfg,
                           const AlternationOptions& opts = {}, double tol = 1e-2,
                           double max_gamma = 64.0);

struct EllipsoidOptions {
  bool synthesize = false;
  /// Keep V (and the multipliers paired with it) fixed; only the multiplier
  /// phase runs.
  bool freeze_V = false;
  int max_iterations = 50;
  double tol = 1e-4;
  SolverSettings solver;
  std::function<void(const TraceRecord&)> on_record;
};

struct EllipsoidResult {
  RunStatus status = RunStatus::kSolverFailure;
  Certificate certificate;
};

/// Frank-Wolfe iterations on -log det P: each phase maximizes the
/// linearization <P_k^{-1}, P>, then a line search on the segment to the
/// new vertex. Throws MisconfigurationError for a warm certificate with
/// epsilon > 0.
EllipsoidResult min_volume_ellipsoid(const SafetyProblem& prob, const DegreeConfig& cfg,
                                     const Certificate& warm,
                                     const EllipsoidOptions& opts = {});

/// Solves one multiplier phase at the certificate's V (and h_s) to fill in
/// multipliers and Gram matrices.
PhaseResult complete_certificate(const SafetyProblem& prob, const DegreeConfig& cfg,
                                 const Polynomial& V,
                                 const std::optional<std::vector<Polynomial>>& h_s,
                                 double gamma, const SolverSettings& settings = {});

}  // namespace polysafe
