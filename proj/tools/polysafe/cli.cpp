#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "polysafe/audit.hpp"
#include "polysafe/certificate_io.hpp"
#include "polysafe/error.hpp"
#include "polysafe/parser.hpp"
#include "polysafe/plot.hpp"
#include "polysafe/problem.hpp"
#include "polysafe/safety.hpp"
#include "polysafe/sdpa.hpp"
#include "polysafe/simulator.hpp"

namespace polysafe::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Options {
  std::string command;
  std::string problem;
  std::string certificate;
  std::string solution;
  std::string manifest;
  std::string out = "polysafe_out";
  int deg_v = 2;
  int deg_hs = 3;
  int deg_mult = 2;
  int max_escalation = 1;
  int max_degree = 4;
  double gamma = 0.0;
  int max_rounds = 30;
  std::uint64_t seed = 1;
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  bool min_volume = false;
  bool minimize_gamma = false;
  std::string initial_v;
  // check
  bool complete = false;
  int samples = 10000;
  double tol_recon = 1e-6;
  double tol_eig = 1e-6;
  double tol_sample = 1e-7;
  // simulate
  int n_traj = 500;
  double horizon = 10.0;
  double dt = 0.01;
  std::string attack = "mixed";
  double a_max = 1.0;
  int grid = 21;
  // export-sdpa
  std::string phase = "both";
  bool synthesize = false;
  bool negate_objective = false;
};

class Run {
 public:
  Run(const Options& o, std::vector<std::string> args, std::ostream& out, std::ostream& err)
      : o_(o), args_(std::move(args)), out_(out), err_(err) {}

  int dispatch() {
    fs::create_directories(o_.out);
    if (o_.command == "verify") return verify(false);
    if (o_.command == "synthesize") return verify(true);
    if (o_.command == "check") return check();
    if (o_.command == "simulate") return simulate();
    if (o_.command == "export-sdpa") return export_sdpa_cmd();
    if (o_.command == "solve-sdpa") return solve_sdpa_cmd();
    throw MisconfigurationError("unknown command " + o_.command);
  }

 private:
  DegreeConfig degrees() const {
    DegreeConfig c;
    c.deg_V = o_.deg_v;
    c.deg_hs = o_.deg_hs;
    c.deg_lambda.fill(o_.deg_mult);
    c.max_degree_escalation = o_.max_escalation;
    c.degree_cap = o_.max_degree;
    c.validate();
    return c;
  }

  SolverSettings solver() const {
    SolverSettings s;
    s.gap_tol = o_.tol_gap;
    s.feas_tol = o_.tol_feas;
    return s;
  }

  AlternationOptions alternation() const {
    AlternationOptions a;
    a.gamma = o_.gamma;
    a.max_rounds = o_.max_rounds;
    a.solver = solver();
    a.on_record = [this](const TraceRecord& r) { log(r); };
    return a;
  }

  void log(const TraceRecord& r) const {
    err_ << "trace level=" << r.level << " round=" << r.round << " phase=" << to_string(r.phase)
         << " value=" << r.value << " status=" << to_string(r.status) << " iters=" << r.iterations
         << " accepted=" << (r.accepted ? 1 : 0) << "\n";
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream f(fs::path(o_.out) / name);
    if (!f) throw Error("cannot write " + (fs::path(o_.out) / name).string());
    f << text;
  }

  void write_manifest(const SafetyProblem* prob) const {
    json m;
    m["tool"] = "polysafe";
    m["version"] = POLYSAFE_VERSION;
    m["command"] = o_.command;
    m["args"] = args_;
    m["problem"] = o_.problem;
    if (prob) {
      std::ostringstream h;
      h << std::hex << problem_hash(*prob);
      m["problem_hash"] = h.str();
    }
    m["degrees"] = {{"deg_v", o_.deg_v},
                    {"deg_hs", o_.deg_hs},
                    {"deg_mult", o_.deg_mult},
                    {"max_escalation", o_.max_escalation},
                    {"max_degree", o_.max_degree}};
    m["seed"] = o_.seed;
    m["tolerances"] = {{"gap", o_.tol_gap}, {"feas", o_.tol_feas}};
    m["out"] = o_.out;
    write("manifest.json", m.dump(2) + "\n");
  }

  std::optional<Polynomial> initial_v(const SafetyProblem& prob) const {
    if (o_.initial_v.empty()) return std::nullopt;
    return parse_poly(o_.initial_v, prob.state_vars);
  }

  // Audits, writes outputs, and maps the outcome to an exit code.
  int finish(const SafetyProblem& prob, const Certificate& cert, bool certified) {
    write("certificate.json", certificate_to_json(cert) + "\n");
    write("trace.json", trace_to_json(cert.trace) + "\n");
    write_manifest(&prob);
    out_ << "epsilon " << cert.epsilon << "\n";
    out_ << "V " << cert.V.to_string() << "\n";
    if (cert.h_s) {
      for (const auto& h : *cert.h_s) out_ << "h_s " << h.to_string() << "\n";
    }
    if (!certified) {
      out_ << "not certified\n";
      return kExitNegative;
    }
    const AuditReport report = audit(prob, cert, {}, o_.samples, o_.seed);
    write("audit.json", audit_report_json(report) + "\n");
    out_ << (report.passed ? "certified (audit pass)" : "audit failed") << "\n";
    return report.passed ? kExitOk : kExitNegative;
  }

  int verify(bool synthesize) {
    const SafetyProblem prob = load_problem(o_.problem);
    const DegreeConfig cfg = degrees();
    const AlternationOptions opts = alternation();
    AlternationResult res;
    if (o_.minimize_gamma) {
      if (synthesize) throw MisconfigurationError("--minimize-gamma applies to verify only");
      const GammaResult g = minimize_gamma(prob, cfg, opts);
      for (const auto& [gamma, st] : g.probes) {
        err_ << "probe gamma=" << gamma << " status=" << to_string(st) << "\n";
      }
      if (!g.found) {
        write_manifest(&prob);
        out_ << "no certified gamma found\n";
        return kExitNegative;
      }
      out_ << "gamma* " << g.gamma << "\n";
      res = g.best;
    } else if (!synthesize) {
      res = alternating_verify(prob, cfg, initial_v(prob), opts);
    } else {
      std::optional<Polynomial> v0 = initial_v(prob);
      if (!v0) {
        const AlternationResult pre = alternating_verify(prob, cfg, std::nullopt, opts);
        if (pre.status != RunStatus::kSolverFailure) v0 = pre.certificate.V;
      }
      res = alternating_synthesize(prob, cfg, v0, opts);
    }
    if (res.status == RunStatus::kSolverFailure) {
      write_manifest(&prob);
      err_ << "error: every phase failed to solve\n";
      return kExitError;
    }
    Certificate cert = res.certificate;
    const bool certified = res.status == RunStatus::kCertified;
    if (certified && o_.min_volume) {
      EllipsoidOptions eo;
      eo.synthesize = synthesize;
      eo.solver = solver();
      eo.on_record = [this](const TraceRecord& r) { log(r); };
      const EllipsoidResult ell = min_volume_ellipsoid(prob, res.degrees, cert, eo);
      if (ell.status != RunStatus::kCertified) {
        err_ << "warning: ellipsoid refinement failed; keeping the certificate without P\n";
      } else {
        cert = ell.certificate;
      }
    }
    return finish(prob, cert, certified);
  }

  int check() {
    const SafetyProblem prob = load_problem(o_.problem);
    Certificate cert = load_certificate(o_.certificate);
    if (o_.complete) {
      const PhaseResult r =
          complete_certificate(prob, degrees(), cert.V, cert.h_s, cert.gamma, solver());
      if (!r.usable) {
        out_ << "multiplier completion failed: " << to_string(r.status) << "\n";
        write_manifest(&prob);
        return kExitNegative;
      }
      cert = r.certificate;
      write("completed_certificate.json", certificate_to_json(cert) + "\n");
    }
    const AuditReport report =
        audit(prob, cert, {o_.tol_recon, o_.tol_eig, o_.tol_sample}, o_.samples, o_.seed);
    write("audit.json", audit_report_json(report) + "\n");
    write_manifest(&prob);
    for (const auto& c : report.conditions) {
      out_ << c.name << " defect=" << c.reconstruction_defect << " min_eig=" << c.min_eigenvalue
           << " worst_sample=" << c.worst_sample << " " << (c.passed ? "pass" : "FAIL") << "\n";
    }
    out_ << "verdict " << (report.passed ? "pass" : "fail") << "\n";
    return report.passed ? kExitOk : kExitNegative;
  }

  int simulate() {
    const SafetyProblem prob = load_problem(o_.problem);
    std::optional<Certificate> cert;
    if (!o_.certificate.empty()) cert = load_certificate(o_.certificate);
    ReachOptions ro;
    ro.n_traj = o_.n_traj;
    ro.sim.T = o_.horizon;
    ro.sim.dt = o_.dt;
    ro.seed = o_.seed;
    ro.a_max = o_.a_max;
    ro.greedy_grid = o_.grid;
    ro.on_warning = [this](const std::string& w) { err_ << "warning: " << w << "\n"; };
    if (cert) ro.sim.V = cert->V;
    if (o_.attack == "zero") {
      ro.mode = AttackMode::kZero;
    } else if (o_.attack == "random") {
      ro.mode = AttackMode::kRandom;
    } else if (o_.attack == "greedy") {
      ro.mode = AttackMode::kGreedy;
    } else {
      ro.mode = AttackMode::kMixed;
    }
    if (!cert && ro.mode != AttackMode::kZero && ro.mode != AttackMode::kRandom) {
      err_ << "warning: greedy attacks need a certificate V; using random attacks\n";
      ro.mode = AttackMode::kRandom;
    }
    const std::optional<std::vector<Polynomial>> h_s =
        cert ? cert->h_s : std::optional<std::vector<Polynomial>>();
    const ReachCloud cloud = reach_cloud(prob, h_s, ro);
    const std::optional<Polynomial> V = cert ? std::optional<Polynomial>(cert->V) : std::nullopt;
    write("cloud.csv", cloud_csv(prob, cloud, V));
    write("summary.csv", cloud_summary_csv(cloud));
    if (prob.num_states() == 2) {
      std::vector<Eigen::VectorXd> pts;
      for (const auto& t : cloud.trajectories) pts.insert(pts.end(), t.states.begin(), t.states.end());
      std::vector<PlotCurve> curves{{prob.safe_set, "s = 0", "#d62728"}};
      if (cert) {
        curves.push_back({Polynomial(1.0) - cert->V, "V = 1", "#1f77b4"});
        if (cert->P) {
          Polynomial xpx;
          for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
              xpx += Polynomial(Monomial(prob.state_vars[static_cast<std::size_t>(i)]) *
                                    Monomial(prob.state_vars[static_cast<std::size_t>(j)]),
                                (*cert->P)(i, j));
            }
          }
          curves.push_back({Polynomial(1.0) - xpx, "x'Px = 1", "#2ca02c"});
        }
      }
      write("plot.svg", render_svg(prob.state_vars, state_sampling_box(prob), pts, curves));
    }
    write_manifest(&prob);
    out_ << "trajectories " << cloud.trajectories.size() << "\n";
    out_ << "points " << cloud.points << "\n";
    out_ << "min_s " << cloud.min_s << "\n";
    if (cloud.max_V) out_ << "max_V " << *cloud.max_V << "\n";
    out_ << "fraction_in_S " << cloud.fraction_in_S << "\n";
    out_ << "fraction_in_V " << cloud.fraction_in_V << "\n";
    out_ << "blowup " << (cloud.any_blowup ? 1 : 0) << "\n";
    return kExitOk;
  }

  int export_sdpa_cmd() {
    const SafetyProblem prob = load_problem(o_.problem);
    const DegreeConfig cfg = degrees();
    std::optional<Certificate> cert;
    if (!o_.certificate.empty()) cert = load_certificate(o_.certificate);
    if (o_.phase != "both" && o_.phase != "multiplier" && o_.phase != "V") {
      throw MisconfigurationError("--phase must be multiplier, V or both");
    }
    if (!o_.solution.empty() && o_.phase == "both") {
      throw MisconfigurationError("--solution needs --phase multiplier or --phase V");
    }
    SdpaExportOptions eo;
    eo.negate_objective = o_.negate_objective;

    PhaseSpec mspec;
    mspec.V = cert ? cert->V : default_initial_V(prob, o_.gamma);
    mspec.synthesize = o_.synthesize;
    mspec.gamma = o_.gamma;
    const PhaseProgram mprog = build_phase_program(prob, cfg, mspec);
    const CompiledSos mcomp = compile(mprog.program);
    if (o_.phase != "V") {
      write("multiplier.dat-s", export_sdpa(mcomp.sdp, eo));
      if (!o_.solution.empty()) return lift_external(prob, mprog, mcomp);
    }
    if (o_.phase == "multiplier") {
      write_manifest(&prob);
      return kExitOk;
    }
    PhaseSpec vspec;
    if (cert && !cert->lambda1.is_zero()) {
      vspec.lambda1 = cert->lambda1;
      vspec.lambda3 = cert->lambda3;
      vspec.h_s = cert->h_s;
    } else {
      const PhaseResult m = lift_phase(prob, mprog, mcomp, solve_sdp(mcomp.sdp, solver()));
      if (!m.usable) {
        err_ << "error: multiplier phase failed (" << to_string(m.status) << ")\n";
        return kExitError;
      }
      vspec.lambda1 = m.certificate.lambda1;
      vspec.lambda3 = m.certificate.lambda3;
      vspec.h_s = m.certificate.h_s;
    }
    vspec.synthesize = o_.synthesize;
    if (!o_.synthesize) vspec.h_s.reset();
    vspec.gamma = o_.gamma;
    const PhaseProgram vprog = build_phase_program(prob, cfg, vspec);
    const CompiledSos vcomp = compile(vprog.program);
    write("v.dat-s", export_sdpa(vcomp.sdp, eo));
    if (!o_.solution.empty()) return lift_external(prob, vprog, vcomp);
    write_manifest(&prob);
    return kExitOk;
  }

  int lift_external(const SafetyProblem& prob, const PhaseProgram& prog, const CompiledSos& comp) {
    std::ifstream in(o_.solution);
    if (!in) throw Error("cannot open '" + o_.solution + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    SolverSettings tol;
    tol.feas_tol = std::max(o_.tol_feas, 1e-6);
    tol.gap_tol = std::max(o_.tol_gap, 1e-6);
    const SdpSolution sol = import_sdpa_solution(ss.str(), comp.sdp, tol);
    out_ << "solution " << to_string(sol.status) << " primal_res=" << sol.primal_infeasibility
         << " dual_res=" << sol.dual_infeasibility << " gap=" << sol.duality_gap << "\n";
    const PhaseResult r = lift_phase(prob, prog, comp, sol);
    if (!r.usable) {
      write_manifest(&prob);
      return kExitNegative;
    }
    return finish(prob, r.certificate, r.certificate.epsilon <= 0.0);
  }

  int solve_sdpa_cmd() {
    std::ifstream in(o_.problem);
    if (!in) throw Error("cannot open '" + o_.problem + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const SdpProblem prob = import_sdpa(ss.str());
    const SdpSolution sol = solve_sdp(prob, solver());
    write("solution.sol", export_sdpa_solution(prob, sol));
    write_manifest(nullptr);
    out_ << "status " << to_string(sol.status) << "\n";
    out_.precision(17);
    out_ << "primal_objective " << sol.primal_objective << "\n";
    out_ << "dual_objective " << sol.dual_objective << "\n";
    out_ << "usable " << (sol.usable() ? "yes" : "no") << "\n";
    if (sol.usable()) return kExitOk;
    if (sol.status == SdpStatus::kInfeasiblePrimal || sol.status == SdpStatus::kInfeasibleDual) {
      return kExitNegative;
    }
    return kExitError;
  }

  const Options& o_;
  std::vector<std::string> args_;
  std::ostream& out_;
  std::ostream& err_;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--deg-v", o.deg_v, "Degree of V")->capture_default_str();
  sub->add_option("--deg-hs", o.deg_hs, "Degree of the secondary controller h_s")
      ->capture_default_str();
  sub->add_option("--deg-mult", o.deg_mult, "Degree of the multipliers")->capture_default_str();
  sub->add_option("--max-escalation", o.max_escalation,
                  "Degree escalation steps (+2 each) after a failure")
      ->capture_default_str();
  sub->add_option("--max-degree", o.max_degree, "Cap on escalated degrees (-1: none)")
      ->capture_default_str();
  sub->add_option("--gamma", o.gamma, "Safe-set inflation")->capture_default_str();
  sub->add_option("--max-rounds", o.max_rounds, "Alternation round cap")->capture_default_str();
  sub->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  sub->add_option("--tol-gap", o.tol_gap, "SDP duality-gap tolerance")->capture_default_str();
  sub->add_option("--tol-feas", o.tol_feas, "SDP feasibility tolerance")->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
}

std::vector<std::string> without_out(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    kept.push_back(args[i]);
  }
  return kept;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Polynomial safety certificates and secondary controllers under attacks"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Certify the primary loop");
  verify->add_option("problem", o.problem, "Problem JSON")->required();
  add_common(verify, o);
  verify->add_flag("--minimize-gamma", o.minimize_gamma, "Bisect the smallest certified gamma");
  verify->add_flag("--min-volume", o.min_volume, "Refine with a minimum-volume ellipsoid");
  verify->add_option("--initial-v", o.initial_v, "Initial V (polynomial string)");
  verify->add_option("--samples", o.samples, "Audit samples")->capture_default_str();

  auto* synth = app.add_subcommand("synthesize", "Synthesize a secondary controller");
  synth->add_option("problem", o.problem, "Problem JSON")->required();
  add_common(synth, o);
  synth->add_flag("--min-volume", o.min_volume, "Refine with a minimum-volume ellipsoid");
  synth->add_option("--initial-v", o.initial_v, "Initial V (polynomial string)");
  synth->add_option("--samples", o.samples, "Audit samples")->capture_default_str();

  auto* check = app.add_subcommand("check", "Audit a certificate");
  check->add_option("problem", o.problem, "Problem JSON")->required();
  check->add_option("certificate", o.certificate, "Certificate JSON")->required();
  add_common(check, o);
  check->add_flag("--complete", o.complete,
                  "Recompute multipliers and Gram matrices at the certificate's V and h_s");
  check->add_option("--samples", o.samples, "Sample count")->capture_default_str();
  check->add_option("--tol-recon", o.tol_recon, "Reconstruction tolerance")->capture_default_str();
  check->add_option("--tol-eig", o.tol_eig, "Gram eigenvalue tolerance")->capture_default_str();
  check->add_option("--tol-sample", o.tol_sample, "Sampled violation tolerance")
      ->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Simulate trajectories under attacks");
  sim->add_option("problem", o.problem, "Problem JSON")->required();
  sim->add_option("--certificate", o.certificate, "Certificate with V and h_s");
  add_common(sim, o);
  sim->add_option("--n-traj", o.n_traj, "Trajectories")->capture_default_str();
  sim->add_option("--horizon", o.horizon, "Simulated time")->capture_default_str();
  sim->add_option("--dt", o.dt, "Integration step")->capture_default_str();
  sim->add_option("--attack", o.attack, "zero, random, greedy or mixed")
      ->check(CLI::IsMember({"zero", "random", "greedy", "mixed"}))
      ->capture_default_str();
  sim->add_option("--a-max", o.a_max, "Attack box half-width")->capture_default_str();
  sim->add_option("--grid", o.grid, "Greedy grid points per axis")->capture_default_str();

  auto* exp = app.add_subcommand("export-sdpa", "Write alternation phases as SDPA files");
  exp->add_option("problem", o.problem, "Problem JSON")->required();
  add_common(exp, o);
  exp->add_option("--certificate", o.certificate, "Certificate supplying fixed members");
  exp->add_option("--phase", o.phase, "multiplier, V or both")->capture_default_str();
  exp->add_flag("--synthesize", o.synthesize, "Include h_s as a decision");
  exp->add_flag("--negate-objective", o.negate_objective,
                "Write -C for solvers that maximize the objective matrix");
  exp->add_option("--solution", o.solution,
                  "External solution for the exported phase; lifted and audited");

  auto* solve = app.add_subcommand("solve-sdpa", "Solve an SDPA problem file");
  solve->add_option("file", o.problem, "SDPA .dat-s file")->required();
  solve->add_option("--tol-gap", o.tol_gap, "Duality-gap tolerance")->capture_default_str();
  solve->add_option("--tol-feas", o.tol_feas, "Feasibility tolerance")->capture_default_str();
  solve->add_option("--out", o.out, "Output directory")->capture_default_str();

  auto* rerun = app.add_subcommand("rerun", "Repeat the command recorded in a manifest");
  rerun->add_option("manifest", o.manifest, "manifest.json")->required();
  rerun->add_option("--out", o.out, "Output directory (default: the recorded one)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream ho, he;
    const int code = app.exit(e, ho, he);
    out << ho.str();
    err << he.str();
    return code == 0 ? kExitOk : kExitError;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    if (o.command == "rerun") {
      std::ifstream in(o.manifest);
      if (!in) throw Error("cannot open '" + o.manifest + "'");
      const json m = json::parse(in);
      std::vector<std::string> recorded = m.at("args").get<std::vector<std::string>>();
      if (rerun->count("--out") > 0) {
        recorded = without_out(recorded);
        recorded.push_back("--out");
        recorded.push_back(o.out);
      }
      return run(recorded, out, err);
    }
    Run r(o, args, out, err);
    return r.dispatch();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace polysafe::cli
