#include <random>

#include <benchmark/benchmark.h>

#include "certificates.hpp"
#include "polysafe/parser.hpp"
#include "polysafe/safety.hpp"
#include "polysafe/sdp.hpp"
#include "polysafe/simulator.hpp"
#include "polysafe/sos.hpp"
#include "sdp_fixtures.hpp"

namespace polysafe {
namespace {

const std::string kDataDir = POLYSAFE_DATA_DIR;

SafetyProblem Example() { return load_problem(kDataDir + "/two_state.json"); }

void BM_PolynomialProduct(benchmark::State& state) {
  const Variables xa = Example().all_vars();
  const Polynomial p = parse_poly("(x1 + x2 - a1 + 0.5*a2 + 1)^4", xa);
  for (auto _ : state) benchmark::DoNotOptimize(p * p);
}
BENCHMARK(BM_PolynomialProduct)->Unit(benchmark::kMicrosecond);

void BM_SolveRandomSdp(benchmark::State& state) {
  const SdpProblem p = fixtures::RandomFeasible(7, 3, static_cast<int>(state.range(0)), 20);
  for (auto _ : state) benchmark::DoNotOptimize(solve_sdp(p));
}
BENCHMARK(BM_SolveRandomSdp)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_CheckSos(benchmark::State& state) {
  const Variables xy = make_variables("x", 2, VarKind::kState);
  const Polynomial c = parse_poly("x1^3 - 2*x1*x2^2 + x2 - 0.5", xy);
  const Polynomial p = c * c + parse_poly("x1^2 + x2^2 + 1", xy).pow(3);
  for (auto _ : state) benchmark::DoNotOptimize(check_sos(p));
}
BENCHMARK(BM_CheckSos)->Unit(benchmark::kMillisecond);

PhaseSpec MultiplierSpec(const SafetyProblem& prob) {
  PhaseSpec spec;
  spec.V = fixtures::PublishedV(prob);
  spec.synthesize = true;
  return spec;
}

DegreeConfig Degrees(int d) {
  DegreeConfig cfg;
  cfg.deg_V = d;
  cfg.deg_hs = 3;
  cfg.deg_lambda.fill(d);
  return cfg;
}

void BM_CompileMultiplierPhase(benchmark::State& state) {
  const SafetyProblem prob = Example();
  const DegreeConfig cfg = Degrees(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const PhaseProgram phase = build_synthesis_program(prob, cfg, MultiplierSpec(prob));
    benchmark::DoNotOptimize(compile(phase.program));
  }
}
BENCHMARK(BM_CompileMultiplierPhase)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SolveMultiplierPhase(benchmark::State& state) {
  const SafetyProblem prob = Example();
  const DegreeConfig cfg = Degrees(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_phase(prob, cfg, MultiplierSpec(prob), {}));
}
BENCHMARK(BM_SolveMultiplierPhase)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SimulateGreedy(benchmark::State& state) {
  const SafetyProblem prob = Example();
  const auto hs = fixtures::PublishedHs(prob);
  const AttackGenerator gen = greedy_attack(prob, fixtures::PublishedV(prob), hs);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(prob, hs, gen, Eigen::Vector2d(0.1, -0.1)));
  }
}
BENCHMARK(BM_SimulateGreedy)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace polysafe

BENCHMARK_MAIN();
