#include "polysafe/sdpa.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "polysafe/error.hpp"
#include "sdp_fixtures.hpp"

namespace polysafe {
namespace {

using fixtures::RandomFeasible;
using fixtures::TraceProblem;

GTEST_TEST(SdpaTest, TraceProblemText) {
  EXPECT_EQ(export_sdpa(TraceProblem()),
            "2\n"
            "1\n"
            "2\n"
            "1 1\n"
            "0 1 1 1 1.0\n"
            "0 1 2 2 1.0\n"
            "1 1 1 1 1.0\n"
            "2 1 2 2 1.0\n");
}

GTEST_TEST(SdpaTest, NoFreeBlockWithoutFreeVars) {
  const std::string text = export_sdpa(TraceProblem());
  EXPECT_EQ(text.find("free_vars"), std::string::npos);
  EXPECT_EQ(text.find('-'), std::string::npos);
}

GTEST_TEST(SdpaTest, FreeVariablesSplit) {
  SdpProblem p;
  p.blocks = {1};
  p.objective = {{0, 0, 0, 1.0}};
  p.constraints.push_back({{{0, 0, 0, 1.0}}, {{0, 2.0}}, 3.0});
  p.free_vars = 1;
  p.free_objective = {0.5};
  const std::string text = export_sdpa(p);
  EXPECT_EQ(text.rfind("* free_vars 1\n", 0), 0u);
  EXPECT_NE(text.find("\n1 -2\n"), std::string::npos);

  const SdpProblem back = import_sdpa(text);
  EXPECT_EQ(back.free_vars, 1);
  EXPECT_EQ(back.blocks, p.blocks);
  ASSERT_EQ(back.constraints.size(), 1u);
  ASSERT_EQ(back.constraints[0].free_entries.size(), 1u);
  EXPECT_DOUBLE_EQ(back.constraints[0].free_entries[0].value, 2.0);
  ASSERT_EQ(back.free_objective.size(), 1u);
  EXPECT_DOUBLE_EQ(back.free_objective[0], 0.5);

  // min x + u / 2 s.t. x + 2 u = 3, x >= 0: optimum 3/4 at x = 0.
  const SdpSolution a = solve_sdp(p);
  const SdpSolution b = solve_sdp(back);
  ASSERT_EQ(a.status, SdpStatus::kOptimal);
  ASSERT_EQ(b.status, SdpStatus::kOptimal);
  EXPECT_NEAR(a.primal_objective, 0.75, 1e-7);
  EXPECT_NEAR(b.primal_objective, a.primal_objective, 1e-7);
}

GTEST_TEST(SdpaTest, NegatedObjective) {
  const std::string text = export_sdpa(TraceProblem(), {.negate_objective = true});
  EXPECT_NE(text.find("0 1 1 1 -1.0"), std::string::npos);
}

GTEST_TEST(SdpaTest, ExportIsDeterministic) {
  const SdpProblem p = RandomFeasible(3, 3, 5, 12);
  EXPECT_EQ(export_sdpa(p), export_sdpa(p));
  EXPECT_EQ(export_sdpa(import_sdpa(export_sdpa(p))), export_sdpa(p));
}

GTEST_TEST(SdpaTest, RoundTripPreservesOptimum) {
  for (unsigned seed = 0; seed < 20; ++seed) {
    SdpProblem p = RandomFeasible(seed, 1 + seed % 3, 6, 4 + static_cast<int>(seed));
    int entries = 0;
    for (int n : p.blocks) entries += n * (n + 1) / 2;
    if (p.num_constraints() >= entries) p.constraints.resize(entries - 1);
    const SdpSolution a = solve_sdp(p);
    const SdpSolution b = solve_sdp(import_sdpa(export_sdpa(p)));
    ASSERT_EQ(a.status, SdpStatus::kOptimal) << seed;
    ASSERT_EQ(b.status, SdpStatus::kOptimal) << seed;
    EXPECT_NEAR(a.primal_objective, b.primal_objective,
                1e-7 * (1.0 + std::abs(a.primal_objective)))
        << seed;
  }
}

GTEST_TEST(SdpaTest, ImportToleratesPunctuation) {
  const SdpProblem p = import_sdpa(
      "\" a comment\n* another\n2 = m\n1\n{2}\n{1, 1}\n"
      "0 1 1 1 1.0\n0 1 2 2 1.0\n1 1 1 1 1.0\n2 1 2 2 1.0\n");
  EXPECT_EQ(export_sdpa(p), export_sdpa(TraceProblem()));
}

GTEST_TEST(SdpaTest, DiagonalBlocksExpand) {
  const SdpProblem p = import_sdpa("1\n1\n-2\n1\n0 1 1 1 1\n0 1 2 2 1\n1 1 1 1 1\n1 1 2 2 1\n");
  ASSERT_EQ(p.blocks.size(), 2u);
  EXPECT_EQ(p.blocks[0], 1);
  EXPECT_EQ(p.blocks[1], 1);
  const SdpSolution s = solve_sdp(p);
  EXPECT_EQ(s.status, SdpStatus::kOptimal);
  EXPECT_NEAR(s.primal_objective, 1.0, 1e-7);
}

GTEST_TEST(SdpaTest, MalformedProblem) {
  EXPECT_THROW(import_sdpa(""), MalformedResultError);
  EXPECT_THROW(import_sdpa("2\n1\n2\n"), MalformedResultError);
  EXPECT_THROW(import_sdpa("2\n1\n2\n1 1\n0 1 3 3 1.0\n"), MalformedResultError);
  try {
    import_sdpa("2\n1\n2\n1 1\n0 1 1 1 1.0\n0 1 x 2 1.0\n");
    FAIL();
  } catch (const MalformedResultError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}

GTEST_TEST(SdpaSolutionTest, RoundTrip) {
  const SdpProblem p = TraceProblem();
  const SdpSolution s = solve_sdp(p);
  const SdpSolution back = import_sdpa_solution(export_sdpa_solution(p, s), p);
  EXPECT_EQ(back.status, SdpStatus::kOptimal);
  ASSERT_EQ(back.X.size(), 1u);
  EXPECT_LE((back.X[0] - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(back.primal_objective, 2.0, 1e-6);
}

GTEST_TEST(SdpaSolutionTest, ExternalLayout) {
  // Hand-written result, as an external solver would report it.
  const SdpProblem p = TraceProblem();
  const SdpSolution s = import_sdpa_solution(
      "1.0 1.0\n"
      "2 1 1 1 1.0\n"
      "2 1 2 2 1.0\n",
      p);
  EXPECT_EQ(s.status, SdpStatus::kOptimal);
  EXPECT_NEAR(s.primal_objective, 2.0, 1e-12);
  EXPECT_NEAR(s.dual_objective, 2.0, 1e-12);
}

GTEST_TEST(SdpaSolutionTest, InfeasibleResultIsFlagged) {
  const SdpProblem p = TraceProblem();
  const SdpSolution s = import_sdpa_solution(
      "1.0 1.0\n"
      "2 1 1 1 1.5\n"
      "2 1 2 2 1.0\n",
      p);
  EXPECT_EQ(s.status, SdpStatus::kNumericalFailure);
  EXPECT_GT(s.primal_infeasibility, 1e-8);
}

GTEST_TEST(SdpaSolutionTest, Truncated) {
  const SdpProblem p = TraceProblem();
  EXPECT_THROW(import_sdpa_solution("", p), MalformedResultError);
  EXPECT_THROW(import_sdpa_solution("1.0\n", p), MalformedResultError);
  EXPECT_THROW(import_sdpa_solution("1.0 1.0\n2 1 1\n", p), MalformedResultError);
  EXPECT_THROW(import_sdpa_solution("1.0 1.0\n2 1 5 5 1.0\n", p), MalformedResultError);
}

}  // namespace
}  // namespace polysafe
