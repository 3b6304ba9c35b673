#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "polysafe/polynomial.hpp"

namespace polysafe {

/// Closed-loop safety problem
///   xdot = f(x, a) + g(x) u_s,  u_s = h_s(x_s),  x_s = xs_map(x)
/// with safe set {s >= 0}, initial set {T >= 0} and admissible attacks
/// {a : A(x, a) >= 0}.
struct SafetyProblem {
  Variables state_vars;
  Variables attack_vars;
  /// Names for the measured signals x_s; the secondary controller is a
  /// polynomial in these.
  Variables measurement_vars;
  std::vector<Polynomial> f;
  /// One row per state, one column per secondary input.
  std::vector<std::vector<Polynomial>> g;
  Polynomial safe_set;
  Polynomial initial_set;
  Polynomial attack_set;
  std::vector<Polynomial> xs_map;

  std::size_t num_states() const { return state_vars.size(); }
  std::size_t num_inputs() const { return g.empty() ? 0 : g.front().size(); }
  /// State variables followed by attack variables.
  Variables all_vars() const;
  /// True when every entry of g is identically zero.
  bool input_map_is_zero() const;
  /// g(x) * u for a vector of secondary inputs.
  std::vector<Polynomial> apply_input_map(
      const std::vector<Polynomial>& u) const;
  /// Composes a polynomial in measurement_vars with xs_map.
  Polynomial compose_measurements(const Polynomial& h) const;
  /// f + g * (h_s o xs_map), one h_s polynomial per secondary input.
  std::vector<Polynomial> closed_loop_field(
      const std::vector<Polynomial>& h_s) const;

  /// Checks dimensions and variable membership; throws DimensionError or
  /// SchemaError.
  void validate() const;
};

/// Plant and primary controller pieces from which the closed loop is built.
struct PlantControllerSpec {
  Variables plant_state_vars;       // x_p
  Variables controller_state_vars;  // x_c (empty for state feedback)
  /// Placeholder names for the controller's input argument (y + a_y in the
  /// dynamic case, x_p + a_y in the state-feedback case).
  Variables controller_input_vars;
  Variables actuator_attack_vars;  // a_u
  Variables sensor_attack_vars;    // a_y
  bool state_feedback = false;

  std::vector<Polynomial> f_p;               // n_p
  std::vector<std::vector<Polynomial>> g_p;  // n_p x n_u
  std::vector<Polynomial> h_p;               // n_y
  std::vector<Polynomial> f_c;               // n_c, over (x_c, inputs)
  std::vector<Polynomial> h_c;               // n_u
  Eigen::MatrixXd E_u;                       // n_u x n_s
  Eigen::MatrixXd C_s;                       // n_xs x n_y
};

struct ClosedLoopFragment {
  Variables state_vars;
  Variables attack_vars;
  std::vector<Polynomial> f;
  std::vector<std::vector<Polynomial>> g;
  std::vector<Polynomial> xs_map;
};

/// Builds f, g and the measured-signal map of the closed loop from plant
/// and primary-controller polynomials.
ClosedLoopFragment assemble_closed_loop(const PlantControllerSpec& spec);

/// Loads a problem document (JSON). Polynomial strings are parsed against
/// the declared universes; errors carry the field path.
SafetyProblem load_problem(const std::filesystem::path& file);
SafetyProblem parse_problem_json(std::string_view text,
                                 const std::filesystem::path& base_dir = {});
PlantControllerSpec parse_plant_controller_json(std::string_view text);

/// Canonical JSON rendering (full precision) and its 64-bit FNV-1a hash.
std::string canonical_problem_json(const SafetyProblem& prob);
std::uint64_t problem_hash(const SafetyProblem& prob);

}  // namespace polysafe
