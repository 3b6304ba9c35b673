#pragma once

// SDPA sparse text format (.dat-s) for SdpProblem, and a CSDP-style
// solution layout for exchanging results with external solvers.
//
// Problem file:
//   line 1  number of constraints m
//   line 2  number of blocks
//   line 3  block sizes (negative for diagonal blocks)
//   line 4  right-hand side b
//   then    `k blk i j v` with k = 0 for the objective C, 1-based indices,
//           i <= j.
// Free variables u are split as u = u+ - u- into one trailing diagonal block
// of size 2 * free_vars, announced by a `* free_vars N` comment.
//
// Solution file: the y vector on one line, then `1 blk i j v` entries of Z
// and `2 blk i j v` entries of X.

#include <string>
#include <string_view>

#include "polysafe/sdp.hpp"

namespace polysafe {

struct SdpaExportOptions {
  /// Writes -C, for solvers that maximize <F0, Y>.
  bool negate_objective = false;
};

std::string export_sdpa(const SdpProblem& prob, const SdpaExportOptions& opts = {});

/// Parses a problem file. A `* free_vars N` comment folds the trailing
/// diagonal block back into N free variables. Throws MalformedResultError.
SdpProblem import_sdpa(std::string_view text);

std::string export_sdpa_solution(const SdpProblem& prob, const SdpSolution& sol);

/// Reads a solution for `prob` (as exported) and derives the status from its
/// own residual checks; a reported external status is never used.
/// Throws MalformedResultError with the offending line.
SdpSolution import_sdpa_solution(std::string_view text, const SdpProblem& prob,
                                 const SolverSettings& tolerances = {});

}  // namespace polysafe
