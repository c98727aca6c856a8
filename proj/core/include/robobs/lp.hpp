#pragma once

// Small dense linear programs: minimize c'x subject to A_ub x <= b_ub and
// A_eq x = b_eq with x free. Solved as the dual standard-form problem by a
// two-phase revised simplex, which keeps the basis as small as x.

#include "robobs/lti.hpp"

namespace robobs {

struct LinearProgram {
  Vector c;
  Matrix a_ub;
  Vector b_ub;
  Matrix a_eq;
  Vector b_eq;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LpOptions {
  double tol = 1e-10;
  int max_iterations = 20000;
};

struct LpResult {
  LpStatus status = LpStatus::kIterationLimit;
  Vector x;
  double objective = 0.0;
  int iterations = 0;
};

LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts = {});

}  // namespace robobs
