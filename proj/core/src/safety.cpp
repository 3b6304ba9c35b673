#include "polysafe/safety.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "polysafe/error.hpp"
#include "polysafe/sampling.hpp"

namespace polysafe {

namespace {

constexpr double kEllipsoidShift = 1e-6;
constexpr double kEpsilonFloor = -1e3;

Monomial lower_exponent(const Monomial& m, Variable v) {
  std::vector<Monomial::Factor> factors;
  for (const auto& [var, e] : m.factors()) {
    if (var == v) {
      if (e > 1) factors.emplace_back(var, e - 1);
    } else {
      factors.emplace_back(var, e);
    }
  }
  return Monomial(std::move(factors));
}

PolyExpr differentiate(const PolyExpr& p, Variable v) {
  PolyExpr out;
  for (const auto& [m, c] : p.terms()) {
    const int e = m.exponent(v);
    if (e == 0) continue;
    out.add_term(lower_exponent(m, v), c * static_cast<double>(e));
  }
  return out;
}

Polynomial fixed_part(const PolyExpr& p) {
  if (p.has_decisions()) {
    throw MisconfigurationError("bilinear product of two decision expressions");
  }
  Polynomial out;
  for (const auto& [m, c] : p.terms()) out.add_term(m, c.constant);
  return out + Polynomial();
}

// Product where at most one side carries decisions.
PolyExpr mul(const PolyExpr& a, const PolyExpr& b) {
  if (!a.has_decisions()) return b * fixed_part(a);
  return a * fixed_part(b);
}

// h(measurement vars) composed with xs_map.
PolyExpr compose(const PolyExpr& h, const SafetyProblem& prob) {
  std::map<Variable, Polynomial> bindings;
  for (std::size_t i = 0; i < prob.measurement_vars.size(); ++i) {
    bindings.emplace(prob.measurement_vars[i], prob.xs_map.at(i));
  }
  PolyExpr out;
  for (const auto& [m, c] : h.terms()) {
    const Polynomial mp = substitute(Polynomial(m), bindings);
    for (const auto& [mm, cc] : mp.terms()) out.add_term(mm, c * cc);
  }
  return out;
}

std::string hs_name(std::size_t j) { return "h_s" + std::to_string(j + 1); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double neg_logdet(const Eigen::MatrixXd& P) {
  Eigen::LLT<Eigen::MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd L = llt.matrixL();
  return -2.0 * L.diagonal().array().log().sum();
}

}  // namespace

void DegreeConfig::validate() const {
  if (deg_V < 0 || deg_hs < 0) throw MisconfigurationError("degrees must be >= 0");
  if (deg_V % 2 != 0) throw MisconfigurationError("deg_V must be even");
  for (int d : deg_lambda) {
    if (d < 0) throw MisconfigurationError("multiplier degrees must be >= 0");
  }
  if (max_degree_escalation < 0) {
    throw MisconfigurationError("max_degree_escalation must be >= 0");
  }
}

DegreeConfig DegreeConfig::escalated(int level) const {
  DegreeConfig out = *this;
  auto raise = [&](int& d) {
    const int target = d + 2 * level;
    d = degree_cap < 0 ? target : std::max(d, std::min(target, degree_cap));
  };
  raise(out.deg_V);
  if (out.deg_V % 2 != 0) --out.deg_V;
  raise(out.deg_hs);
  for (int& d : out.deg_lambda) raise(d);
  return out;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kMultiplier:
      return "multiplier";
    case Phase::kV:
      return "V";
    case Phase::kEllipsoidMultiplier:
      return "ellipsoid-multiplier";
    case Phase::kEllipsoidV:
      return "ellipsoid-V";
    case Phase::kComplete:
      return "complete";
  }
  return "unknown";
}

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kCertified:
      return "certified";
    case RunStatus::kNotCertified:
      return "not-certified";
    case RunStatus::kSolverFailure:
      return "solver-failure";
  }
  return "unknown";
}

bool AlternationTrace::non_increasing(double tol) const {
  std::optional<double> last;
  int level = -1;
  for (const auto& r : records) {
    if (!r.accepted) continue;
    if (r.level != level) {
      level = r.level;
      last.reset();
    }
    if (last && r.value > *last + tol) return false;
    last = r.value;
  }
  return true;
}

PhaseProgram build_phase_program(const SafetyProblem& prob, const DegreeConfig& cfg,
                                 const PhaseSpec& spec) {
  cfg.validate();
  if (!spec.V) {
    if (!spec.lambda1 || !spec.lambda3 || (spec.synthesize && !spec.h_s) ||
        (spec.ellipsoid && !spec.lambda5)) {
      throw MisconfigurationError(
          "V and its paired multipliers cannot both be decisions");
    }
  }
  if (spec.synthesize && spec.h_s && spec.h_s->size() != prob.num_inputs()) {
    throw DimensionError("h_s: expected one polynomial per secondary input");
  }
  const Variables& x = prob.state_vars;
  const Variables xa = prob.all_vars();

  PhaseProgram out;
  out.spec = spec;
  SosProgram& prog = out.program;

  // With the origin in T, V(0) = 0 keeps {V <= 1} from collapsing onto a
  // point where grad V vanishes.
  const int v_min_degree = prob.initial_set.constant_term() >= 0.0 ? 1 : 0;
  const PolyExpr V = spec.V ? PolyExpr(*spec.V)
                            : prog.new_free_poly("V", x, cfg.deg_V, v_min_degree).expr;
  const PolyExpr l1 = spec.lambda1 ? PolyExpr(*spec.lambda1)
                                   : prog.new_sos_poly("lambda1", x, cfg.deg_lambda[0]).expr;
  const PolyExpr l2 = prog.new_sos_poly("lambda2", x, cfg.deg_lambda[1]).expr;
  const PolyExpr l3 = spec.lambda3 ? PolyExpr(*spec.lambda3)
                                   : prog.new_free_poly("lambda3", xa, cfg.deg_lambda[2]).expr;
  const PolyExpr l4 = prog.new_sos_poly("lambda4", xa, cfg.deg_lambda[3]).expr;

  // Closed-loop field, possibly affine in the h_s coefficients.
  std::vector<PolyExpr> field;
  for (const auto& fi : prob.f) field.emplace_back(fi);
  if (spec.synthesize && !prob.input_map_is_zero()) {
    for (std::size_t j = 0; j < prob.num_inputs(); ++j) {
      PolyExpr h;
      if (spec.h_s) {
        h = PolyExpr((*spec.h_s)[j]);
      } else {
        h = prog.new_free_poly(hs_name(j), prob.measurement_vars, cfg.deg_hs).expr;
      }
      const PolyExpr hx = compose(h, prob);
      for (std::size_t i = 0; i < field.size(); ++i) {
        if (prob.g[i][j].is_zero()) continue;
        field[i] += hx * prob.g[i][j];
      }
    }
  } else if (spec.synthesize && !spec.h_s) {
    // Zero input map: h_s cannot act but is still reported.
    for (std::size_t j = 0; j < prob.num_inputs(); ++j) {
      prog.new_free_poly(hs_name(j), prob.measurement_vars, cfg.deg_hs);
    }
  }

  LinExpr eps(spec.fixed_epsilon);
  LinExpr objective;
  if (spec.slack) {
    const int e = prog.new_free_scalar("epsilon");
    const int shift = prog.new_nonneg_scalar("epsilon_shift");
    // (eps - shift) / 1e3 = -1, i.e. eps = shift - 1e3 >= -1e3.
    LinExpr bound = LinExpr::handle(e, 1.0 / -kEpsilonFloor) +
                    LinExpr::handle(shift, -1.0 / -kEpsilonFloor);
    bound.constant = 1.0;
    prog.add_equality("epsilon_floor", bound);
    eps = LinExpr::handle(e);
    objective = LinExpr::handle(e);
    out.has_epsilon = true;
  }

  const PolyExpr one(Polynomial(1.0));
  PolyExpr cond1 = PolyExpr(prob.safe_set + Polynomial(spec.gamma)) - mul(l1, one - V);
  prog.add_sos_constraint("cond1", cond1, x);

  PolyExpr cond2 = one - V - l2 * prob.initial_set;
  prog.add_sos_constraint("cond2", cond2, x);

  PolyExpr vdot;
  for (std::size_t i = 0; i < x.size(); ++i) {
    vdot += mul(differentiate(V, x[i]), field[i]);
  }
  PolyExpr cond3 = -vdot - mul(l3, V - one) - l4 * prob.attack_set;
  PolyExpr eps_term;
  eps_term.add_term(Monomial(), eps);
  cond3 += eps_term;
  prog.add_sos_constraint("cond3", cond3, xa);

  if (spec.ellipsoid) {
    const int n = static_cast<int>(x.size());
    const MatrixDecision& P = prog.new_psd_matrix("P", n, kEllipsoidShift);
    const PolyExpr l5 = spec.lambda5 ? PolyExpr(*spec.lambda5)
                                     : prog.new_sos_poly("lambda5", x, cfg.deg_lambda[4]).expr;
    PolyExpr xpx;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        xpx.add_term(Monomial(x[static_cast<std::size_t>(i)]) *
                         Monomial(x[static_cast<std::size_t>(j)]),
                     P.entry(i, j));
      }
    }
    PolyExpr cond4 = one - xpx - mul(l5, one - V);
    prog.add_sos_constraint("cond4", cond4, x);
    const Eigen::MatrixXd& W = spec.ellipsoid_weight;
    if (W.rows() != n || W.cols() != n) {
      throw DimensionError("ellipsoid weight must be n x n");
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) objective.add_scaled(P.entry(i, j), -W(i, j));
    }
  }
  prog.set_objective(objective);
  return out;
}

PhaseProgram build_verification_program(const SafetyProblem& prob,
                                        const DegreeConfig& cfg, PhaseSpec spec) {
  spec.synthesize = false;
  spec.h_s.reset();
  return build_phase_program(prob, cfg, spec);
}

PhaseProgram build_synthesis_program(const SafetyProblem& prob, const DegreeConfig& cfg,
                                     PhaseSpec spec) {
  spec.synthesize = true;
  return build_phase_program(prob, cfg, spec);
}

PhaseResult lift_phase(const SafetyProblem& prob, const PhaseProgram& phase,
                       const CompiledSos& compiled, const SdpSolution& sol) {
  const PhaseSpec& spec = phase.spec;
  PhaseResult out;
  out.status = sol.status;
  out.iterations = sol.iterations;
  out.usable = sol.usable();
  if (!out.usable) return out;
  const SosSolution lifted = lift_solution(phase.program, compiled, sol);
  Certificate& c = out.certificate;
  c.state_vars = prob.state_vars;
  c.attack_vars = prob.attack_vars;
  c.measurement_vars = prob.measurement_vars;
  c.V = spec.V ? *spec.V : lifted.polys.at("V");
  c.lambda1 = spec.lambda1 ? *spec.lambda1 : lifted.polys.at("lambda1");
  c.lambda2 = lifted.polys.at("lambda2");
  c.lambda3 = spec.lambda3 ? *spec.lambda3 : lifted.polys.at("lambda3");
  c.lambda4 = lifted.polys.at("lambda4");
  if (spec.ellipsoid) {
    c.lambda5 = spec.lambda5 ? *spec.lambda5 : lifted.polys.at("lambda5");
    c.P = lifted.matrices.at("P");
  }
  if (spec.synthesize) {
    if (spec.h_s) {
      c.h_s = *spec.h_s;
    } else {
      std::vector<Polynomial> h;
      for (std::size_t j = 0; j < prob.num_inputs(); ++j) {
        h.push_back(lifted.polys.at(hs_name(j)));
      }
      c.h_s = h;
    }
  }
  c.epsilon = phase.has_epsilon ? lifted.scalars.at("epsilon") : spec.fixed_epsilon;
  c.gamma = spec.gamma;
  for (const auto& [name, g] : lifted.constraint_grams) c.grams[name] = g;
  for (const auto& [name, g] : lifted.decision_grams) c.grams[name] = g;
  return out;
}

PhaseResult solve_phase(const SafetyProblem& prob, const DegreeConfig& cfg,
                        const PhaseSpec& spec, const SolverSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  const PhaseProgram phase = build_phase_program(prob, cfg, spec);
  const CompiledSos compiled = compile(phase.program);
  const SdpSolution sol = solve_sdp(compiled.sdp, settings);
  PhaseResult out = lift_phase(prob, phase, compiled, sol);
  out.wall_seconds = seconds_since(start);
  return out;
}

Polynomial default_initial_V(const SafetyProblem& prob, double gamma) {
  const Variables& x = prob.state_vars;
  const Polynomial s = prob.safe_set + Polynomial(gamma);
  const double r_s = inscribed_radius(s, x);
  if (!(r_s > 0.0)) {
    throw MisconfigurationError("default initial V needs the origin inside the safe set");
  }
  const Box box = bounding_box(s, x).scaled(1.5);
  double r_t = sampled_outer_radius(prob.initial_set, x, box, 20000, 1);
  const CompiledPolynomial t(prob.initial_set, x);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.size()));
  if (t(std::span<const double>(origin.data(), x.size())) >= 0.0) {
    // Small initial sets can slip between samples.
    for (const auto& d : probe_directions(static_cast<int>(x.size()))) {
      r_t = std::max(r_t, first_exit(t, origin, d, r_s));
    }
  }
  const double r = 0.5 * (r_t + r_s);
  Polynomial sq;
  for (const Variable& v : x) sq += Polynomial(Monomial(v, 2));
  return sq * (1.0 / (r * r));
}

namespace {

struct RunContext {
  const SafetyProblem& prob;
  const AlternationOptions& opts;
  AlternationTrace* trace;

  void record(const TraceRecord& r) {
    trace->records.push_back(r);
    if (opts.on_record) opts.on_record(r);
  }
};

AlternationResult run_alternation(const SafetyProblem& prob, const DegreeConfig& cfg,
                                  const std::optional<Polynomial>& initial_V,
                                  const AlternationOptions& opts, bool synthesize) {
  cfg.validate();
  prob.validate();
  AlternationResult best;
  best.status = RunStatus::kSolverFailure;
  best.degrees = cfg;
  best.certificate.epsilon = std::numeric_limits<double>::infinity();
  AlternationTrace trace;
  RunContext ctx{prob, opts, &trace};

  Polynomial V0 = initial_V ? *initial_V : default_initial_V(prob, opts.gamma);
  bool any_usable = false;

  for (int level = 0; level <= cfg.max_degree_escalation; ++level) {
    const DegreeConfig dc = cfg.escalated(level);
    if (level > 0) {
      const DegreeConfig prev = cfg.escalated(level - 1);
      if (dc.deg_V == prev.deg_V && dc.deg_hs == prev.deg_hs && dc.deg_lambda == prev.deg_lambda) {
        break;
      }
    }
    std::optional<Certificate> inc;
    std::vector<double> history;
    const Polynomial V_start =
        (level > 0 && std::isfinite(best.certificate.epsilon)) ? best.certificate.V : V0;

    auto accept = [&](PhaseResult& r, Phase phase, int round) -> bool {
      TraceRecord rec;
      rec.round = round;
      rec.phase = phase;
      rec.level = level;
      rec.status = r.status;
      rec.iterations = r.iterations;
      rec.wall_seconds = r.wall_seconds;
      rec.value = r.usable ? r.certificate.epsilon : std::numeric_limits<double>::quiet_NaN();
      rec.accepted = r.usable && (!inc || r.certificate.epsilon <= inc->epsilon + 1e-8);
      ctx.record(rec);
      if (!rec.accepted) return false;
      any_usable = true;
      if (inc) {
        // Fixed members keep the Gram matrices from the phase that chose
        // them.
        for (const auto& [name, g] : inc->grams) r.certificate.grams.try_emplace(name, g);
      }
      inc = r.certificate;
      return true;
    };

    for (int round = 1; round <= opts.max_rounds; ++round) {
      PhaseSpec mspec;
      mspec.V = inc ? inc->V : V_start;
      mspec.synthesize = synthesize;
      mspec.gamma = opts.gamma;
      PhaseResult m = solve_phase(prob, dc, mspec, opts.solver);
      const bool m_ok = accept(m, Phase::kMultiplier, round);
      if (inc && inc->epsilon <= 0.0) break;
      if (!inc) break;

      PhaseSpec vspec;
      vspec.lambda1 = inc->lambda1;
      vspec.lambda3 = inc->lambda3;
      vspec.synthesize = synthesize;
      if (synthesize) vspec.h_s = inc->h_s;
      vspec.gamma = opts.gamma;
      PhaseResult v = solve_phase(prob, dc, vspec, opts.solver);
      const bool v_ok = accept(v, Phase::kV, round);
      if (inc->epsilon <= 0.0) break;
      if (!m_ok && !v_ok) break;

      history.push_back(inc->epsilon);
      const auto k = static_cast<std::size_t>(opts.stall_rounds);
      if (history.size() > k &&
          history[history.size() - 1 - k] - history.back() < opts.stall_tol) {
        break;
      }
    }

    if (inc && inc->epsilon < best.certificate.epsilon) {
      best.certificate = *inc;
      best.degrees = dc;
      best.status = inc->epsilon <= 0.0 ? RunStatus::kCertified : RunStatus::kNotCertified;
    }
    if (best.status == RunStatus::kCertified) break;
  }
  if (!any_usable) best.status = RunStatus::kSolverFailure;
  best.certificate.trace = trace;
  best.certificate.gamma = opts.gamma;
  return best;
}

}  // namespace

AlternationResult alternating_verify(const SafetyProblem& prob, const DegreeConfig& cfg,
                                     const std::optional<Polynomial>& initial_V,
                                     const AlternationOptions& opts) {
  return run_alternation(prob, cfg, initial_V, opts, false);
}

AlternationResult alternating_synthesize(const SafetyProblem& prob, const DegreeConfig& cfg,
                                         const std::optional<Polynomial>& initial_V,
                                         const AlternationOptions& opts) {
  return run_alternation(prob, cfg, initial_V, opts, true);
}

GammaResult minimize_gamma(const SafetyProblem& prob, const DegreeConfig& cfg,
                           const AlternationOptions& opts, double tol, double max_gamma) {
  GammaResult out;
  auto probe = [&](double gamma) {
    AlternationOptions o = opts;
    o.gamma = gamma;
    AlternationResult r = alternating_verify(prob, cfg, std::nullopt, o);
    out.probes.emplace_back(gamma, r.status);
    if (r.status == RunStatus::kCertified) {
      out.best = r;
      out.gamma = gamma;
      out.found = true;
      return true;
    }
    return false;
  };

  if (probe(0.0)) return out;
  double lo = 0.0;
  double hi = 1.0;
  while (!probe(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > max_gamma) return out;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  // The last successful probe is the smallest certified gamma.
  return out;
}

namespace {

Polynomial lerp(const Polynomial& a, const Polynomial& b, double t) {
  return a * (1.0 - t) + b * t;
}

Certificate combine(const Certificate& a, const Certificate& b, double t) {
  Certificate c = a;
  c.V = lerp(a.V, b.V, t);
  c.lambda1 = lerp(a.lambda1, b.lambda1, t);
  c.lambda2 = lerp(a.lambda2, b.lambda2, t);
  c.lambda3 = lerp(a.lambda3, b.lambda3, t);
  c.lambda4 = lerp(a.lambda4, b.lambda4, t);
  if (a.lambda5 && b.lambda5) c.lambda5 = lerp(*a.lambda5, *b.lambda5, t);
  if (a.h_s && b.h_s) {
    for (std::size_t j = 0; j < a.h_s->size(); ++j) {
      (*c.h_s)[j] = lerp((*a.h_s)[j], (*b.h_s)[j], t);
    }
  }
  if (a.P && b.P) c.P = (1.0 - t) * *a.P + t * *b.P;
  c.epsilon = (1.0 - t) * a.epsilon + t * b.epsilon;
  for (auto& [name, g] : c.grams) {
    auto it = b.grams.find(name);
    if (it == b.grams.end() || it->second.Q.rows() != g.Q.rows()) continue;
    g.Q = (1.0 - t) * g.Q + t * it->second.Q;
    g.raw_defect = std::max(g.raw_defect, it->second.raw_defect);
    g.defect = std::max(g.defect, it->second.defect);
    g.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                           g.Q, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .minCoeff();
  }
  return c;
}

// argmax over t in [0, 1] of log det((1 - t) A + t B), a concave function.
double line_search(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  auto phi = [&](double t) { return -neg_logdet((1.0 - t) * A + t * B); };
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = phi(x1), f2 = phi(x2);
  for (int k = 0; k < 80; ++k) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = phi(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = phi(x1);
    }
  }
  double best_t = 0.5 * (lo + hi);
  double best = phi(best_t);
  for (double t : {0.0, 1.0}) {
    const double v = phi(t);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

EllipsoidResult min_volume_ellipsoid(const SafetyProblem& prob, const DegreeConfig& cfg,
                                     const Certificate& warm, const EllipsoidOptions& opts) {
  if (!(warm.epsilon <= 0.0)) {
    throw MisconfigurationError("min_volume_ellipsoid needs a warm certificate with epsilon <= 0");
  }
  const auto n = static_cast<Eigen::Index>(prob.num_states());
  EllipsoidResult out;
  AlternationTrace trace = warm.trace;
  auto record = [&](int round, Phase phase, const PhaseResult& r, double value, bool accepted) {
    TraceRecord rec;
    rec.round = round;
    rec.phase = phase;
    rec.level = -1;
    rec.value = value;
    rec.status = r.status;
    rec.iterations = r.iterations;
    rec.accepted = accepted;
    rec.wall_seconds = r.wall_seconds;
    trace.records.push_back(rec);
    if (opts.on_record) opts.on_record(rec);
  };

  auto multiplier_spec = [&](const Certificate& c, const Eigen::MatrixXd& W) {
    PhaseSpec s;
    s.V = c.V;
    s.synthesize = opts.synthesize;
    s.slack = false;
    s.fixed_epsilon = 0.0;
    s.gamma = warm.gamma;
    s.ellipsoid = true;
    s.ellipsoid_weight = W;
    return s;
  };
  auto v_spec = [&](const Certificate& c, const Eigen::MatrixXd& W) {
    PhaseSpec s;
    s.lambda1 = c.lambda1;
    s.lambda3 = c.lambda3;
    s.lambda5 = c.lambda5;
    s.synthesize = opts.synthesize;
    if (opts.synthesize) s.h_s = c.h_s;
    s.slack = false;
    s.fixed_epsilon = 0.0;
    s.gamma = warm.gamma;
    s.ellipsoid = true;
    s.ellipsoid_weight = W;
    return s;
  };

  // Initial vertex: maximize trace(P).
  PhaseResult first =
      solve_phase(prob, cfg, multiplier_spec(warm, Eigen::MatrixXd::Identity(n, n)), opts.solver);
  if (!first.usable) {
    record(0, Phase::kEllipsoidMultiplier, first, std::numeric_limits<double>::quiet_NaN(), false);
    out.status = RunStatus::kSolverFailure;
    out.certificate = warm;
    out.certificate.trace = trace;
    return out;
  }
  Certificate cur = first.certificate;
  double J = neg_logdet(*cur.P);
  record(0, Phase::kEllipsoidMultiplier, first, J, true);

  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double J_start = J;
    std::vector<Phase> phases{Phase::kEllipsoidMultiplier};
    if (!opts.freeze_V) phases.push_back(Phase::kEllipsoidV);
    bool progressed = false;
    for (Phase phase : phases) {
      const Eigen::MatrixXd W = cur.P->inverse();
      const PhaseSpec spec =
          phase == Phase::kEllipsoidMultiplier ? multiplier_spec(cur, W) : v_spec(cur, W);
      PhaseResult r = solve_phase(prob, cfg, spec, opts.solver);
      if (!r.usable) {
        record(it, phase, r, std::numeric_limits<double>::quiet_NaN(), false);
        continue;
      }
      for (const auto& [name, g] : cur.grams) r.certificate.grams.try_emplace(name, g);
      const double t = line_search(*cur.P, *r.certificate.P);
      Certificate next = combine(cur, r.certificate, t);
      const double J_next = neg_logdet(*next.P);
      const bool accepted = J_next <= J;
      record(it, phase, r, J_next, accepted);
      if (accepted) {
        cur = std::move(next);
        J = J_next;
        progressed = true;
      }
    }
    if (!progressed || J_start - J < opts.tol) break;
  }
  cur.epsilon = 0.0;
  cur.trace = trace;
  out.status = RunStatus::kCertified;
  out.certificate = std::move(cur);
  return out;
}

PhaseResult complete_certificate(const SafetyProblem& prob, const DegreeConfig& cfg,
                                 const Polynomial& V,
                                 const std::optional<std::vector<Polynomial>>& h_s,
                                 double gamma, const SolverSettings& settings) {
  PhaseSpec spec;
  spec.V = V;
  spec.synthesize = h_s.has_value();
  spec.h_s = h_s;
  spec.gamma = gamma;
  PhaseResult r = solve_phase(prob, cfg, spec, settings);
  if (r.usable) {
    TraceRecord rec;
    rec.round = 1;
    rec.phase = Phase::kComplete;
    rec.value = r.certificate.epsilon;
    rec.status = r.status;
    rec.iterations = r.iterations;
    rec.wall_seconds = r.wall_seconds;
    r.certificate.trace.records.push_back(rec);
  }
  return r;
}

}  // namespace polysafe
