#include "polysafe/simulator.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "polysafe/error.hpp"
#include "polysafe/sampling.hpp"

namespace polysafe {

namespace {

Eigen::VectorXd concat(const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
  Eigen::VectorXd v(x.size() + a.size());
  v << x, a;
  return v;
}

double eval(const CompiledPolynomial& p, const Eigen::VectorXd& v) {
  return p(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

bool attack_set_bounded(const SafetyProblem& prob) {
  if (prob.attack_vars.empty()) return true;
  std::map<Variable, Polynomial> at_origin;
  for (const Variable& x : prob.state_vars) at_origin.emplace(x, Polynomial(0.0));
  try {
    const Box b = bounding_box(substitute(prob.attack_set, at_origin), prob.attack_vars);
    return (b.hi - b.lo).maxCoeff() < 1e2;
  } catch (const Error&) {
    return false;
  }
}

Eigen::VectorXd sample_initial_state(const SafetyProblem& prob, std::mt19937_64& rng) {
  const Variables& x = prob.state_vars;
  const auto n = static_cast<Eigen::Index>(x.size());
  const CompiledPolynomial T(prob.initial_set, x);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(n);
  Box box;
  if (eval(T, origin) >= 0.0) {
    box = bounding_box(prob.initial_set, x);
    if ((box.hi - box.lo).maxCoeff() < 1e-9) return origin;
  } else {
    box = bounding_box(prob.safe_set, x).scaled(1.5);
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Eigen::VectorXd p = sample_box(box, 1, rng).front();
    if (eval(T, p) >= 0.0) return p;
  }
  if (eval(T, origin) >= 0.0) return origin;
  throw EmptyAdmissibleSetError("no sample of the initial set found");
}

}  // namespace

ClosedLoop::ClosedLoop(const SafetyProblem& prob,
                       const std::optional<std::vector<Polynomial>>& h_s)
    : field_(h_s ? prob.closed_loop_field(*h_s) : prob.f),
      n_(prob.state_vars.size()),
      k_(prob.attack_vars.size()) {
  const Variables xa = prob.all_vars();
  for (const auto& fi : field_) compiled_.emplace_back(fi, xa);
}

Eigen::VectorXd ClosedLoop::operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& a) const {
  const Eigen::VectorXd v = concat(x, a);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) out(static_cast<Eigen::Index>(i)) = eval(compiled_[i], v);
  return out;
}

AttackGenerator zero_attack(const SafetyProblem& prob) {
  const auto k = static_cast<Eigen::Index>(prob.attack_vars.size());
  return [k](int, double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(k).eval(); };
}

AttackGenerator constant_attack(const Eigen::VectorXd& a) {
  return [a](int, double, const Eigen::VectorXd&) { return a; };
}

AttackGenerator random_attack(const SafetyProblem& prob, std::uint64_t seed, double a_max,
                              int hold_steps) {
  const auto k = static_cast<Eigen::Index>(prob.attack_vars.size());
  auto rng = std::make_shared<std::mt19937_64>(seed);
  auto current = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(k));
  const int hold = std::max(hold_steps, 1);
  return [=](int step, double, const Eigen::VectorXd&) {
    if (step % hold == 0) {
      std::uniform_real_distribution<double> u(-a_max, a_max);
      for (Eigen::Index i = 0; i < k; ++i) (*current)(i) = u(*rng);
    }
    return *current;
  };
}

AttackGenerator greedy_attack(const SafetyProblem& prob, const Polynomial& V,
                              const std::optional<std::vector<Polynomial>>& h_s,
                              const GreedyOptions& opts) {
  const auto k = static_cast<Eigen::Index>(prob.attack_vars.size());
  if (!attack_set_bounded(prob) && opts.on_warning) {
    opts.on_warning("attack set is unbounded; greedy search clipped to [-" +
                    std::to_string(opts.a_max) + ", " + std::to_string(opts.a_max) + "]^" +
                    std::to_string(k));
  }
  // Vdot(x, a) as one polynomial over (x, a).
  const std::vector<Polynomial> field = h_s ? prob.closed_loop_field(*h_s) : prob.f;
  Polynomial vdot;
  for (std::size_t i = 0; i < prob.state_vars.size(); ++i) {
    vdot += V.differentiate(prob.state_vars[i]) * field[i];
  }
  const Variables xa = prob.all_vars();
  auto vdot_c = std::make_shared<CompiledPolynomial>(vdot, xa);
  auto A = std::make_shared<CompiledPolynomial>(prob.attack_set, xa);

  std::vector<Eigen::VectorXd> grid;
  const int g = std::max(opts.grid, 1);
  std::size_t total = 1;
  for (Eigen::Index i = 0; i < k; ++i) total *= static_cast<std::size_t>(g);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Eigen::VectorXd a(k);
    std::size_t r = idx;
    for (Eigen::Index i = 0; i < k; ++i) {
      const int c = static_cast<int>(r % static_cast<std::size_t>(g));
      r /= static_cast<std::size_t>(g);
      a(i) = g == 1 ? 0.0 : -opts.a_max + 2.0 * opts.a_max * c / (g - 1);
    }
    grid.push_back(a);
  }
  return [=](int, double, const Eigen::VectorXd& x) {
    double best = -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd* pick = nullptr;
    for (const auto& a : grid) {
      const Eigen::VectorXd v = concat(x, a);
      if (eval(*A, v) < 0.0) continue;
      const double val = eval(*vdot_c, v);
      if (val > best) {
        best = val;
        pick = &a;
      }
    }
    if (!pick) throw EmptyAdmissibleSetError("no admissible attack on the search grid");
    return *pick;
  };
}

Eigen::VectorXd project_attack(const CompiledPolynomial& A, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& a) {
  if (eval(A, concat(x, a)) >= 0.0) return a;
  if (eval(A, concat(x, Eigen::VectorXd::Zero(a.size()))) < 0.0) {
    throw EmptyAdmissibleSetError("attack set excludes a = 0 at the current state");
  }
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (eval(A, concat(x, mid * a)) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo * a;
}

Trajectory simulate(const SafetyProblem& prob, const std::optional<std::vector<Polynomial>>& h_s,
                    const AttackGenerator& gen, const Eigen::VectorXd& x0,
                    const SimulationOptions& opts) {
  if (!(opts.dt > 0.0)) throw MisconfigurationError("dt must be positive");
  if (!x0.allFinite()) throw MisconfigurationError("initial state must be finite");
  if (x0.size() != static_cast<Eigen::Index>(prob.num_states())) {
    throw DimensionError("initial state has the wrong dimension");
  }
  const ClosedLoop rhs(prob, h_s);
  const Variables xa = prob.all_vars();
  const CompiledPolynomial A(prob.attack_set, xa);
  const CompiledPolynomial s(prob.safe_set, prob.state_vars);
  std::optional<CompiledPolynomial> V;
  if (opts.V) V.emplace(*opts.V, prob.state_vars);

  Trajectory tr;
  const int steps = static_cast<int>(std::llround(opts.T / opts.dt));
  Eigen::VectorXd x = x0;
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  for (int k = 0; k < steps; ++k) {
    const double t = k * opts.dt;
    const Eigen::VectorXd a = project_attack(A, x, gen(k, t, x));
    const double h = opts.dt;
    const Eigen::VectorXd k1 = rhs(x, a);
    const Eigen::VectorXd k2 = rhs(x + 0.5 * h * k1, a);
    const Eigen::VectorXd k3 = rhs(x + 0.5 * h * k2, a);
    const Eigen::VectorXd k4 = rhs(x + h * k3, a);
    x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    tr.attacks.push_back(a);
    if (!x.allFinite() || x.norm() > opts.blowup_norm) {
      tr.blew_up = true;
      break;
    }
    tr.times.push_back((k + 1) * opts.dt);
    tr.states.push_back(x);
  }
  if (tr.attacks.size() < tr.states.size()) {
    tr.attacks.push_back(tr.attacks.empty()
                             ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prob.attack_vars.size()))
                             : tr.attacks.back());
  }
  tr.attacks.resize(tr.states.size());
  tr.min_s = std::numeric_limits<double>::infinity();
  for (const auto& xi : tr.states) {
    tr.min_s = std::min(tr.min_s, eval(s, xi));
    if (V) tr.max_V = std::max(tr.max_V.value_or(-std::numeric_limits<double>::infinity()), eval(*V, xi));
  }
  return tr;
}

ReachCloud reach_cloud(const SafetyProblem& prob, const std::optional<std::vector<Polynomial>>& h_s,
                       const ReachOptions& opts, double V_slack) {
  if ((opts.mode == AttackMode::kGreedy || opts.mode == AttackMode::kMixed) && !opts.sim.V) {
    throw MisconfigurationError("greedy attacks need a V");
  }
  ReachCloud cloud;
  std::mt19937_64 rng(opts.seed);
  std::optional<AttackGenerator> greedy;
  if (opts.mode == AttackMode::kGreedy || opts.mode == AttackMode::kMixed) {
    GreedyOptions g;
    g.grid = opts.greedy_grid;
    g.a_max = opts.a_max;
    g.on_warning = opts.on_warning;
    greedy = greedy_attack(prob, *opts.sim.V, h_s, g);
  }
  const CompiledPolynomial s(prob.safe_set, prob.state_vars);
  std::optional<CompiledPolynomial> V;
  if (opts.sim.V) V.emplace(*opts.sim.V, prob.state_vars);
  std::size_t in_s = 0, in_v = 0;
  cloud.min_s = std::numeric_limits<double>::infinity();
  for (int i = 0; i < opts.n_traj; ++i) {
    const Eigen::VectorXd x0 = sample_initial_state(prob, rng);
    const std::uint64_t traj_seed = rng();
    AttackGenerator gen;
    const bool use_greedy =
        opts.mode == AttackMode::kGreedy || (opts.mode == AttackMode::kMixed && i % 2 == 0);
    if (opts.mode == AttackMode::kZero) {
      gen = zero_attack(prob);
    } else if (use_greedy) {
      gen = *greedy;
    } else {
      gen = random_attack(prob, traj_seed, opts.a_max, opts.hold_steps);
    }
    Trajectory tr = simulate(prob, h_s, gen, x0, opts.sim);
    for (const auto& x : tr.states) {
      ++cloud.points;
      if (eval(s, x) >= 0.0) ++in_s;
      if (!V || eval(*V, x) <= 1.0 + V_slack) ++in_v;
    }
    cloud.min_s = std::min(cloud.min_s, tr.min_s);
    if (tr.max_V) cloud.max_V = std::max(cloud.max_V.value_or(*tr.max_V), *tr.max_V);
    cloud.any_blowup = cloud.any_blowup || tr.blew_up;
    cloud.trajectories.push_back(std::move(tr));
  }
  if (cloud.points > 0) {
    cloud.fraction_in_S = static_cast<double>(in_s) / static_cast<double>(cloud.points);
    cloud.fraction_in_V = static_cast<double>(in_v) / static_cast<double>(cloud.points);
  }
  return cloud;
}

namespace {

void write_rows(std::ostringstream& os, const SafetyProblem& prob, const Trajectory& traj,
                const std::optional<Polynomial>& V, const std::string& prefix) {
  const CompiledPolynomial s(prob.safe_set, prob.state_vars);
  std::optional<CompiledPolynomial> v;
  if (V) v.emplace(*V, prob.state_vars);
  os.precision(17);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    os << prefix << traj.times[i];
    for (Eigen::Index j = 0; j < traj.states[i].size(); ++j) os << "," << traj.states[i](j);
    for (Eigen::Index j = 0; j < traj.attacks[i].size(); ++j) os << "," << traj.attacks[i](j);
    os << "," << eval(s, traj.states[i]) << ",";
    if (v) os << eval(*v, traj.states[i]);
    os << "\n";
  }
}

std::string header(const SafetyProblem& prob) {
  std::string h = "t";
  for (const auto& x : prob.state_vars) h += "," + x.name();
  for (const auto& a : prob.attack_vars) h += "," + a.name();
  return h + ",s,V\n";
}

}  // namespace

std::string trajectory_csv(const SafetyProblem& prob, const Trajectory& traj,
                           const std::optional<Polynomial>& V, bool with_header) {
  std::ostringstream os;
  if (with_header) os << header(prob);
  write_rows(os, prob, traj, V, "");
  return os.str();
}

std::string cloud_csv(const SafetyProblem& prob, const ReachCloud& cloud,
                      const std::optional<Polynomial>& V) {
  std::ostringstream os;
  os << "traj," << header(prob);
  for (std::size_t i = 0; i < cloud.trajectories.size(); ++i) {
    write_rows(os, prob, cloud.trajectories[i], V, std::to_string(i) + ",");
  }
  return os.str();
}

std::string cloud_summary_csv(const ReachCloud& cloud) {
  std::ostringstream os;
  os.precision(17);
  os << "traj,min_s,max_V,blew_up\n";
  for (std::size_t i = 0; i < cloud.trajectories.size(); ++i) {
    const Trajectory& t = cloud.trajectories[i];
    os << i << "," << t.min_s << ",";
    if (t.max_V) os << *t.max_V;
    os << "," << (t.blew_up ? 1 : 0) << "\n";
  }
  return os.str();
}

}  // namespace polysafe
