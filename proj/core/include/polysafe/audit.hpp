#pragma once

// Solver-independent certificate checks: every condition is rebuilt from the
// problem and certificate polynomials, matched against its Gram
// decomposition, eigen-checked and sampled.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polysafe/problem.hpp"
#include "polysafe/safety.hpp"
#include "polysafe/sampling.hpp"

namespace polysafe {

struct AuditTolerances {
  double recon = 1e-6;
  double eig = 1e-6;
  double sample = 1e-7;
};

struct ConditionRecord {
  /// "cond1".."cond4", an SOS multiplier ("lambda1", ...), or "epsilon"
  /// (passes iff the slack is <= 0; worst_sample holds -epsilon).
  std::string name;
  double reconstruction_defect = 0.0;
  double min_eigenvalue = 0.0;
  /// Most negative sampled value of the rebuilt polynomial (or its minimum
  /// over the samples when none is negative).
  double worst_sample = 0.0;
  /// Point (state vars, then attack vars) where worst_sample was seen.
  Eigen::VectorXd worst_point;
  bool passed = false;
};

struct AuditReport {
  std::vector<ConditionRecord> conditions;
  bool passed = false;
  const ConditionRecord* find(const std::string& name) const;
};

/// The rebuilt condition polynomials, keyed like Certificate::grams.
std::map<std::string, Polynomial> condition_polynomials(const SafetyProblem& prob,
                                                        const Certificate& cert);

/// Throws IncompleteCertificateError naming every missing member.
AuditReport audit(const SafetyProblem& prob, const Certificate& cert,
                  const AuditTolerances& tol = {}, int samples = 10000,
                  std::uint64_t seed = 1);

std::string audit_report_json(const AuditReport& report, int indent = 2);

/// Default sampling box for states: 1.5x the bounding box of {s >= 0}.
Box state_sampling_box(const SafetyProblem& prob);

struct ContainmentWitness {
  Eigen::VectorXd point;
  /// Value of the outer set's polynomial there (negative).
  double value = 0.0;
};

/// Samples the box for points with A(x) >= 0 and B(x) < 0, returning the one
/// with the most negative B.
std::optional<ContainmentWitness> sample_containment(const Polynomial& A, const Polynomial& B,
                                                     const Variables& vars, const Box& box,
                                                     int n, std::uint64_t seed);

}  // namespace polysafe
