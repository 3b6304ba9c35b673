#include "polysafe/problem.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "polysafe/error.hpp"
#include "polysafe/parser.hpp"

namespace polysafe {

using nlohmann::json;

Variables SafetyProblem::all_vars() const {
  Variables out = state_vars;
  out.insert(out.end(), attack_vars.begin(), attack_vars.end());
  return out;
}

bool SafetyProblem::input_map_is_zero() const {
  for (const auto& row : g) {
    for (const auto& entry : row) {
      if (!entry.is_zero()) return false;
    }
  }
  return true;
}

std::vector<Polynomial> SafetyProblem::apply_input_map(
    const std::vector<Polynomial>& u) const {
  if (u.size() != num_inputs()) {
    throw DimensionError("input map expects " + std::to_string(num_inputs()) +
                         " inputs, got " + std::to_string(u.size()));
  }
  std::vector<Polynomial> out(num_states());
  for (std::size_t i = 0; i < num_states(); ++i) {
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (!g[i][j].is_zero()) out[i] += g[i][j] * u[j];
    }
  }
  return out;
}

Polynomial SafetyProblem::compose_measurements(const Polynomial& h) const {
  std::map<Variable, Polynomial> bindings;
  for (std::size_t i = 0; i < measurement_vars.size(); ++i) {
    bindings.emplace(measurement_vars[i], xs_map[i]);
  }
  return substitute(h, bindings);
}

std::vector<Polynomial> SafetyProblem::closed_loop_field(
    const std::vector<Polynomial>& h_s) const {
  if (h_s.empty()) return f;
  std::vector<Polynomial> composed;
  composed.reserve(h_s.size());
  for (const auto& h : h_s) composed.push_back(compose_measurements(h));
  std::vector<Polynomial> out = f;
  const auto push = apply_input_map(composed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += push[i];
  return out;
}

namespace {

bool mentions_only(const Polynomial& p, std::span<const Variable> allowed) {
  for (const Variable& v : p.variables()) {
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      return false;
    }
  }
  return true;
}

void check_unique_names(const Variables& vars) {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      if (vars[i].name() == vars[j].name()) {
        throw SchemaError("duplicate variable name '" + vars[i].name() + "'");
      }
    }
  }
}

}  // namespace

void SafetyProblem::validate() const {
  Variables universe = all_vars();
  universe.insert(universe.end(), measurement_vars.begin(),
                  measurement_vars.end());
  check_unique_names(universe);
  if (f.size() != state_vars.size()) {
    throw DimensionError("f has " + std::to_string(f.size()) +
                         " components for " +
                         std::to_string(state_vars.size()) + " states");
  }
  if (g.size() != state_vars.size()) {
    throw DimensionError("g has " + std::to_string(g.size()) + " rows for " +
                         std::to_string(state_vars.size()) + " states");
  }
  for (const auto& row : g) {
    if (row.size() != num_inputs()) {
      throw DimensionError("g rows have inconsistent column counts");
    }
  }
  if (measurement_vars.size() != xs_map.size()) {
    throw DimensionError("measurement_vars and xs_map lengths differ");
  }
  const Variables xa = all_vars();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!mentions_only(f[i], xa)) {
      throw SchemaError("f[" + std::to_string(i) +
                        "] mentions a variable outside (x, a)");
    }
  }
  for (const auto& row : g) {
    for (const auto& entry : row) {
      if (!mentions_only(entry, state_vars)) {
        throw SchemaError("g mentions a non-state variable");
      }
    }
  }
  if (!mentions_only(safe_set, state_vars)) {
    throw SchemaError("safe_set mentions a non-state variable");
  }
  if (!mentions_only(initial_set, state_vars)) {
    throw SchemaError("initial_set mentions a non-state variable");
  }
  if (!mentions_only(attack_set, xa)) {
    throw SchemaError("attack_set mentions a variable outside (x, a)");
  }
  for (const auto& m : xs_map) {
    if (!mentions_only(m, state_vars)) {
      throw SchemaError("xs_map mentions a non-state variable");
    }
  }
}

// ------------------------------------------------------------ composition

namespace {

std::map<Variable, Polynomial> make_bindings(const Variables& names,
                                    const std::vector<Polynomial>& values) {
  std::map<Variable, Polynomial> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.emplace(names[i], values[i]);
  return out;
}

void check_selection(const Eigen::MatrixXd& m, const std::string& name) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    int ones = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (v != 0.0 && v != 1.0) {
        throw DimensionError(name + " entries must be 0 or 1");
      }
      if (v == 1.0) ++ones;
    }
    if (ones > 1) {
      throw DimensionError(name + " row " + std::to_string(r) +
                           " selects more than one entry");
    }
  }
}

}  // namespace

ClosedLoopFragment assemble_closed_loop(const PlantControllerSpec& spec) {
  const std::size_t np = spec.plant_state_vars.size();
  const std::size_t nc = spec.controller_state_vars.size();
  const std::size_t ny = spec.h_p.size();
  const std::size_t nu = spec.h_c.size();

  if (spec.f_p.size() != np) throw DimensionError("f_p: expected n_p rows");
  if (spec.g_p.size() != np) throw DimensionError("g_p: expected n_p rows");
  for (const auto& row : spec.g_p) {
    if (row.size() != nu) throw DimensionError("g_p: expected n_u columns");
  }
  if (spec.actuator_attack_vars.size() != nu) {
    throw DimensionError("a_u: expected n_u attack variables");
  }
  if (spec.state_feedback) {
    if (nc != 0 || !spec.f_c.empty()) {
      throw DimensionError("f_c: state feedback has no controller state");
    }
    if (spec.controller_input_vars.size() != np ||
        spec.sensor_attack_vars.size() != np) {
      throw DimensionError("h_c: state feedback argument must have n_p entries");
    }
  } else {
    if (spec.f_c.size() != nc) throw DimensionError("f_c: expected n_c rows");
    if (spec.controller_input_vars.size() != ny ||
        spec.sensor_attack_vars.size() != ny) {
      throw DimensionError("f_c: controller input must have n_y entries");
    }
  }
  if (spec.E_u.rows() != static_cast<Eigen::Index>(nu)) {
    throw DimensionError("E_u: expected n_u rows");
  }
  if (spec.C_s.size() > 0 &&
      spec.C_s.cols() != static_cast<Eigen::Index>(ny)) {
    throw DimensionError("C_s: expected n_y columns");
  }
  check_selection(spec.E_u, "E_u");
  check_selection(spec.C_s, "C_s");

  ClosedLoopFragment out;
  out.state_vars = spec.plant_state_vars;
  out.state_vars.insert(out.state_vars.end(), spec.controller_state_vars.begin(),
                        spec.controller_state_vars.end());
  out.attack_vars = spec.actuator_attack_vars;
  out.attack_vars.insert(out.attack_vars.end(), spec.sensor_attack_vars.begin(),
                         spec.sensor_attack_vars.end());

  // Primary control u_p = h_c(argument) + a_u.
  std::vector<Polynomial> u_p(nu);
  if (spec.state_feedback) {
    std::vector<Polynomial> arg(np);
    for (std::size_t i = 0; i < np; ++i) {
      arg[i] = Polynomial(spec.plant_state_vars[i]) +
               Polynomial(spec.sensor_attack_vars[i]);
    }
    const auto b = make_bindings(spec.controller_input_vars, arg);
    for (std::size_t j = 0; j < nu; ++j) {
      u_p[j] = substitute(spec.h_c[j], b) +
               Polynomial(spec.actuator_attack_vars[j]);
    }
  } else {
    for (std::size_t j = 0; j < nu; ++j) {
      u_p[j] = spec.h_c[j] + Polynomial(spec.actuator_attack_vars[j]);
    }
  }

  for (std::size_t i = 0; i < np; ++i) {
    Polynomial row = spec.f_p[i];
    for (std::size_t j = 0; j < nu; ++j) row += spec.g_p[i][j] * u_p[j];
    out.f.push_back(std::move(row));
  }
  if (!spec.state_feedback) {
    std::vector<Polynomial> measured(ny);
    for (std::size_t k = 0; k < ny; ++k) {
      measured[k] = spec.h_p[k] + Polynomial(spec.sensor_attack_vars[k]);
    }
    const auto b = make_bindings(spec.controller_input_vars, measured);
    for (std::size_t i = 0; i < nc; ++i) {
      out.f.push_back(substitute(spec.f_c[i], b));
    }
  }

  const auto ns = static_cast<std::size_t>(spec.E_u.cols());
  out.g.assign(np + nc, std::vector<Polynomial>(ns));
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t s = 0; s < ns; ++s) {
      Polynomial entry;
      for (std::size_t j = 0; j < nu; ++j) {
        const double e = spec.E_u(static_cast<Eigen::Index>(j),
                                  static_cast<Eigen::Index>(s));
        if (e != 0.0) entry += spec.g_p[i][j] * e;
      }
      out.g[i][s] = std::move(entry);
    }
  }

  for (Eigen::Index r = 0; r < spec.C_s.rows(); ++r) {
    Polynomial entry;
    for (Eigen::Index k = 0; k < spec.C_s.cols(); ++k) {
      const double c = spec.C_s(r, k);
      if (c != 0.0) entry += spec.h_p[static_cast<std::size_t>(k)] * c;
    }
    out.xs_map.push_back(std::move(entry));
  }

  for (const auto& row : out.g) {
    for (const auto& entry : row) {
      for (const Variable& v : entry.variables()) {
        if (v.kind() == VarKind::kAttack) {
          throw SchemaError("assembled g mentions attack variable " + v.name());
        }
      }
    }
  }
  return out;
}

// --------------------------------------------------------------- loading

namespace {

const json& require(const json& doc, const char* field) {
  if (!doc.contains(field)) {
    throw SchemaError(std::string("missing field '") + field + "'");
  }
  return doc.at(field);
}

Variables read_vars(const json& doc, const char* field, VarKind kind,
                    bool required) {
  if (!doc.contains(field)) {
    if (required) throw SchemaError(std::string("missing field '") + field + "'");
    return {};
  }
  const json& arr = doc.at(field);
  if (!arr.is_array()) {
    throw SchemaError(std::string("field '") + field + "' must be an array");
  }
  Variables out;
  for (const auto& name : arr) {
    if (!name.is_string()) {
      throw SchemaError(std::string("field '") + field +
                        "' must contain strings");
    }
    out.emplace_back(name.get<std::string>(), kind);
  }
  return out;
}

Polynomial parse_field(const json& value, const std::string& path,
                       std::span<const Variable> universe) {
  std::string text;
  if (value.is_string()) {
    text = value.get<std::string>();
  } else if (value.is_number()) {
    return Polynomial(value.get<double>());
  } else {
    throw SchemaError(path + ": expected a polynomial string");
  }
  try {
    return parse_poly(text, universe);
  } catch (const UnknownIdentifierError& e) {
    throw UnknownIdentifierError(e.token(), e.offset(), path);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.detail(), e.offset());
  }
}

std::vector<Polynomial> parse_vector(const json& doc, const char* field,
                                     std::span<const Variable> universe) {
  const json& arr = require(doc, field);
  if (!arr.is_array()) {
    throw SchemaError(std::string("field '") + field + "' must be an array");
  }
  std::vector<Polynomial> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(parse_field(arr[i],
                              std::string(field) + "[" + std::to_string(i) + "]",
                              universe));
  }
  return out;
}

std::vector<std::vector<Polynomial>> parse_matrix(
    const json& doc, const char* field, std::span<const Variable> universe) {
  const json& rows = require(doc, field);
  if (!rows.is_array()) {
    throw SchemaError(std::string("field '") + field + "' must be an array");
  }
  std::vector<std::vector<Polynomial>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array()) {
      throw SchemaError(std::string(field) + "[" + std::to_string(i) +
                        "] must be an array");
    }
    std::vector<Polynomial> row;
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      row.push_back(parse_field(rows[i][j],
                                std::string(field) + "[" + std::to_string(i) +
                                    "][" + std::to_string(j) + "]",
                                universe));
    }
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd parse_real_matrix(const json& doc, const char* field) {
  const json& rows = require(doc, field);
  if (!rows.is_array()) {
    throw SchemaError(std::string("field '") + field + "' must be an array");
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  const std::size_t cols = rows[0].size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != cols) {
      throw DimensionError(std::string(field) + ": ragged matrix");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j].get<double>();
    }
  }
  return out;
}

json parse_json_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
}

PlantControllerSpec plant_controller_from(const json& doc) {
  PlantControllerSpec spec;
  spec.plant_state_vars = read_vars(doc, "plant_state_vars", VarKind::kState, true);
  spec.controller_state_vars =
      read_vars(doc, "controller_state_vars", VarKind::kState, false);
  spec.controller_input_vars =
      read_vars(doc, "controller_input_vars", VarKind::kMeasurement, true);
  spec.actuator_attack_vars =
      read_vars(doc, "actuator_attack_vars", VarKind::kAttack, true);
  spec.sensor_attack_vars =
      read_vars(doc, "sensor_attack_vars", VarKind::kAttack, true);
  spec.state_feedback = doc.value("state_feedback", false);

  const Variables& xp = spec.plant_state_vars;
  Variables xc_in = spec.controller_state_vars;
  xc_in.insert(xc_in.end(), spec.controller_input_vars.begin(),
               spec.controller_input_vars.end());

  spec.f_p = parse_vector(doc, "f_p", xp);
  spec.g_p = parse_matrix(doc, "g_p", xp);
  spec.h_p = parse_vector(doc, "h_p", xp);
  if (doc.contains("f_c")) spec.f_c = parse_vector(doc, "f_c", xc_in);
  spec.h_c = parse_vector(
      doc, "h_c",
      spec.state_feedback ? spec.controller_input_vars : spec.controller_state_vars);
  spec.E_u = parse_real_matrix(doc, "E_u");
  spec.C_s = doc.contains("C_s") ? parse_real_matrix(doc, "C_s")
                                 : Eigen::MatrixXd(0, 0);
  return spec;
}

}  // namespace

PlantControllerSpec parse_plant_controller_json(std::string_view text) {
  return plant_controller_from(parse_json_text(text));
}

SafetyProblem parse_problem_json(std::string_view text,
                                 const std::filesystem::path& base_dir) {
  const json doc = parse_json_text(text);
  if (!doc.is_object()) throw SchemaError("problem document must be an object");

  SafetyProblem prob;
  if (doc.contains("plant_controller")) {
    const json& pc = doc.at("plant_controller");
    PlantControllerSpec spec;
    if (pc.is_string()) {
      std::ifstream in(base_dir / pc.get<std::string>());
      if (!in) {
        throw SchemaError("cannot open plant_controller document '" +
                          pc.get<std::string>() + "'");
      }
      std::stringstream ss;
      ss << in.rdbuf();
      spec = parse_plant_controller_json(ss.str());
    } else {
      spec = plant_controller_from(pc);
    }
    ClosedLoopFragment frag = assemble_closed_loop(spec);
    prob.state_vars = std::move(frag.state_vars);
    prob.attack_vars = std::move(frag.attack_vars);
    prob.f = std::move(frag.f);
    prob.g = std::move(frag.g);
    prob.xs_map = std::move(frag.xs_map);
  } else {
    prob.state_vars = read_vars(doc, "state_vars", VarKind::kState, true);
    prob.attack_vars = read_vars(doc, "attack_vars", VarKind::kAttack, true);
    const Variables xa = prob.all_vars();
    prob.f = parse_vector(doc, "f", xa);
    if (doc.contains("g")) {
      prob.g = parse_matrix(doc, "g", prob.state_vars);
    } else {
      prob.g.assign(prob.state_vars.size(), {});
    }
    if (doc.contains("xs_map")) {
      prob.xs_map = parse_vector(doc, "xs_map", prob.state_vars);
    }
  }

  if (doc.contains("measurement_vars")) {
    prob.measurement_vars =
        read_vars(doc, "measurement_vars", VarKind::kMeasurement, true);
  } else {
    prob.measurement_vars = make_variables(
        "xs", static_cast<int>(prob.xs_map.size()), VarKind::kMeasurement);
  }

  const Variables xa = prob.all_vars();
  prob.safe_set = parse_field(require(doc, "safe_set"), "safe_set", prob.state_vars);
  prob.initial_set =
      parse_field(require(doc, "initial_set"), "initial_set", prob.state_vars);
  prob.attack_set = parse_field(require(doc, "attack_set"), "attack_set", xa);
  prob.validate();
  return prob;
}

SafetyProblem load_problem(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("cannot open problem file '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem_json(ss.str(), file.parent_path());
}

std::string canonical_problem_json(const SafetyProblem& prob) {
  auto names = [](const Variables& vars) {
    json arr = json::array();
    for (const auto& v : vars) arr.push_back(v.name());
    return arr;
  };
  auto polys = [](const std::vector<Polynomial>& ps) {
    json arr = json::array();
    for (const auto& p : ps) arr.push_back(p.to_string(0));
    return arr;
  };
  json doc;
  doc["state_vars"] = names(prob.state_vars);
  doc["attack_vars"] = names(prob.attack_vars);
  doc["measurement_vars"] = names(prob.measurement_vars);
  doc["f"] = polys(prob.f);
  json g = json::array();
  for (const auto& row : prob.g) g.push_back(polys(row));
  doc["g"] = g;
  doc["safe_set"] = prob.safe_set.to_string(0);
  doc["initial_set"] = prob.initial_set.to_string(0);
  doc["attack_set"] = prob.attack_set.to_string(0);
  doc["xs_map"] = polys(prob.xs_map);
  return doc.dump();
}

std::uint64_t problem_hash(const SafetyProblem& prob) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical_problem_json(prob)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace polysafe
