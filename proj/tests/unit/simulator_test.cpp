#include "polysafe/simulator.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "certificates.hpp"
#include "polysafe/error.hpp"
#include "polysafe/parser.hpp"

namespace polysafe {
namespace {

using fixtures::PublishedHs;
using fixtures::PublishedV;

const std::string kDataDir = POLYSAFE_DATA_DIR;

SafetyProblem Example() { return load_problem(kDataDir + "/two_state.json"); }

// xdot = x + a with a in the unit disc.
SafetyProblem LinearInAttack() {
  return parse_problem_json(R"({
    "state_vars": ["x1", "x2"], "attack_vars": ["a1", "a2"],
    "f": ["x1 + a1", "x2 + a2"],
    "safe_set": "4 - x1^2 - x2^2", "initial_set": "-x1^2 - x2^2",
    "attack_set": "1 - a1^2 - a2^2"
  })");
}

GTEST_TEST(SimulatorTest, ZeroAttackEquilibrium) {
  const SafetyProblem prob = Example();
  SimulationOptions opts;
  opts.T = 5.0;
  opts.V = PublishedV(prob);
  const Trajectory tr =
      simulate(prob, PublishedHs(prob), zero_attack(prob), Eigen::Vector2d::Zero(), opts);
  ASSERT_EQ(tr.times.size(), 501u);
  for (const auto& x : tr.states) EXPECT_EQ(x.norm(), 0.0);
  EXPECT_DOUBLE_EQ(tr.min_s, 1.3);
  EXPECT_DOUBLE_EQ(*tr.max_V, 0.0);
  EXPECT_FALSE(tr.blew_up);
  for (std::size_t i = 1; i < tr.times.size(); ++i) {
    EXPECT_NEAR(tr.times[i] - tr.times[i - 1], 0.01, 1e-12);
  }
}

GTEST_TEST(SimulatorTest, ConstantBoundaryAttackStaysInside) {
  const SafetyProblem prob = Example();
  SimulationOptions opts;
  opts.T = 50.0;
  opts.V = PublishedV(prob);
  const Trajectory tr = simulate(prob, PublishedHs(prob), constant_attack(Eigen::Vector2d(1, 0)),
                                 Eigen::Vector2d::Zero(), opts);
  EXPECT_LE(*tr.max_V, 1.05);
  EXPECT_GT(tr.min_s, 0.0);
  EXPECT_FALSE(tr.blew_up);
}

GTEST_TEST(SimulatorTest, PrimaryOnlyGreedyRun) {
  const SafetyProblem prob = Example();
  SimulationOptions opts;
  opts.T = 50.0;
  const Trajectory tr =
      simulate(prob, std::nullopt, greedy_attack(prob, PublishedV(prob), std::nullopt),
               Eigen::Vector2d::Zero(), opts);
  EXPECT_FALSE(tr.blew_up);
  EXPECT_LT(tr.min_s, 1.3);
  EXPECT_TRUE(std::isfinite(tr.min_s));
}

GTEST_TEST(SimulatorTest, AttacksAreProjected) {
  const SafetyProblem prob = Example();
  const Trajectory tr = simulate(prob, std::nullopt, constant_attack(Eigen::Vector2d(3, 4)),
                                 Eigen::Vector2d::Zero(), {.T = 0.1});
  for (const auto& a : tr.attacks) {
    EXPECT_NEAR(a(0), 0.6, 1e-9);
    EXPECT_NEAR(a(1), 0.8, 1e-9);
  }
}

GTEST_TEST(SimulatorTest, BlowUpIsFlagged) {
  const SafetyProblem prob = parse_problem_json(R"({
    "state_vars": ["x"], "attack_vars": [], "f": ["x^2"],
    "safe_set": "1 - x^2", "initial_set": "-x^2", "attack_set": "1"
  })");
  const Trajectory tr =
      simulate(prob, std::nullopt, zero_attack(prob), Eigen::VectorXd::Constant(1, 1.0));
  EXPECT_TRUE(tr.blew_up);
  EXPECT_LT(tr.times.back(), 1.01);
}

GTEST_TEST(GreedyAttackTest, AlignsWithGradient) {
  const SafetyProblem prob = LinearInAttack();
  const Polynomial V = parse_poly("x1^2 + x2^2", prob.state_vars);
  const AttackGenerator gen = greedy_attack(prob, V, std::nullopt);
  const Eigen::VectorXd a = gen(0, 0.0, Eigen::Vector2d(0.0, 0.5));
  EXPECT_NEAR(a(0), 0.0, 1e-12);
  EXPECT_NEAR(a(1), 1.0, 1e-12);
  const Eigen::VectorXd c = gen(0, 0.0, Eigen::Vector2d(-2.0, 0.0));
  EXPECT_NEAR(c(0), -1.0, 1e-12);
  EXPECT_NEAR(c(1), 0.0, 1e-12);

  // Off-grid directions land within one grid cell of the analytic maximizer.
  const Eigen::Vector2d y(std::cos(1.0), std::sin(1.0));
  const Eigen::VectorXd b = gen(0, 0.0, y);
  EXPECT_LE(b.norm(), 1.0 + 1e-12);
  EXPECT_GT(b.dot(y), 0.95);
}

GTEST_TEST(GreedyAttackTest, TieGoesToSmallestIndex) {
  const SafetyProblem prob = Example();
  const AttackGenerator gen = greedy_attack(prob, PublishedV(prob), PublishedHs(prob));
  const Eigen::VectorXd a = gen(0, 0.0, Eigen::Vector2d::Zero());
  // First admissible point in grid order (a1 fastest): a2 = -1 forces a1 = 0.
  EXPECT_NEAR(a(0), 0.0, 1e-12);
  EXPECT_NEAR(a(1), -1.0, 1e-12);
}

GTEST_TEST(GreedyAttackTest, UnboundedSetWarns) {
  SafetyProblem prob = LinearInAttack();
  prob.attack_set = Polynomial(1.0);
  std::string warning;
  GreedyOptions opts;
  opts.on_warning = [&](const std::string& w) { warning = w; };
  const AttackGenerator gen =
      greedy_attack(prob, parse_poly("x1^2 + x2^2", prob.state_vars), std::nullopt, opts);
  EXPECT_FALSE(warning.empty());
  const Eigen::VectorXd a = gen(0, 0.0, Eigen::Vector2d(1.0, 1.0));
  EXPECT_DOUBLE_EQ(a(0), 1.0);
  EXPECT_DOUBLE_EQ(a(1), 1.0);
}

GTEST_TEST(GreedyAttackTest, EmptyAdmissibleSet) {
  SafetyProblem prob = LinearInAttack();
  prob.attack_set = parse_poly("-1 - a1^2", prob.all_vars());
  const AttackGenerator gen =
      greedy_attack(prob, parse_poly("x1^2 + x2^2", prob.state_vars), std::nullopt);
  EXPECT_THROW(gen(0, 0.0, Eigen::Vector2d(0.1, 0.0)), EmptyAdmissibleSetError);
}

GTEST_TEST(SimulatorTest, Rk4Order) {
  const SafetyProblem prob = parse_problem_json(R"({
    "state_vars": ["x1", "x2"], "attack_vars": [],
    "f": ["x2", "-x1 - 0.1*x2^3"],
    "safe_set": "10 - x1^2 - x2^2", "initial_set": "-x1^2 - x2^2", "attack_set": "1"
  })");
  const Eigen::Vector2d x0(1.0, 0.0);
  auto terminal = [&](double dt) {
    return simulate(prob, std::nullopt, zero_attack(prob), x0, {.T = 2.0, .dt = dt})
        .states.back();
  };
  const Eigen::VectorXd ref = terminal(1e-4);
  const double e1 = (terminal(0.1) - ref).norm();
  const double e2 = (terminal(0.05) - ref).norm();
  const double ratio = e1 / e2;
  EXPECT_GT(ratio, 13.0);
  EXPECT_LT(ratio, 19.0);
}

GTEST_TEST(ReachCloudTest, DeterministicAndContained) {
  const SafetyProblem prob = Example();
  ReachOptions opts;
  opts.n_traj = 20;
  opts.sim.T = 5.0;
  opts.sim.V = PublishedV(prob);
  opts.mode = AttackMode::kMixed;
  opts.seed = 42;
  const ReachCloud a = reach_cloud(prob, PublishedHs(prob), opts);
  const ReachCloud b = reach_cloud(prob, PublishedHs(prob), opts);
  EXPECT_EQ(cloud_csv(prob, a, opts.sim.V), cloud_csv(prob, b, opts.sim.V));
  EXPECT_EQ(a.trajectories.size(), 20u);
  EXPECT_DOUBLE_EQ(a.fraction_in_S, 1.0);
  EXPECT_DOUBLE_EQ(a.fraction_in_V, 1.0);
  EXPECT_GE(a.min_s, 0.0);
  EXPECT_LE(*a.max_V, 1.0 + 5 * opts.sim.dt);

  opts.seed = 43;
  EXPECT_NE(cloud_csv(prob, reach_cloud(prob, PublishedHs(prob), opts), opts.sim.V),
            cloud_csv(prob, a, opts.sim.V));
}

GTEST_TEST(ReachCloudTest, ZeroAttackCloudIsOrigin) {
  const SafetyProblem prob = Example();
  ReachOptions opts;
  opts.n_traj = 5;
  opts.sim.T = 1.0;
  opts.mode = AttackMode::kZero;
  const ReachCloud cloud = reach_cloud(prob, PublishedHs(prob), opts);
  for (const auto& tr : cloud.trajectories) {
    for (const auto& x : tr.states) EXPECT_EQ(x.norm(), 0.0);
  }
}

GTEST_TEST(ReachCloudTest, CsvLayout) {
  const SafetyProblem prob = Example();
  const Trajectory tr = simulate(prob, std::nullopt, zero_attack(prob), Eigen::Vector2d::Zero(),
                                 {.T = 0.02});
  const std::string csv = trajectory_csv(prob, tr, PublishedV(prob));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x1,x2,a1,a2,s,V");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

}  // namespace
}  // namespace polysafe
