#pragma once

#include <cstdint>

#include "sxlmd/model.hpp"

namespace sxlmd {

struct SolveResult {
  Vec x;
  double residual_norm = 0.0;  // 2-norm of b - Ax, or of grad_x Q
  int iterations = 0;
  int matvec_count = 0;  // products A*v, or evaluations of grad_x Q
  bool converged = false;
};

// Work accounting across a trajectory.  Owned per trajectory, never shared.
struct CostCounters {
  std::int64_t matvec_ax = 0;        // products A*v
  std::int64_t matvec_dax = 0;       // products (dA/dr_k)*x
  std::int64_t nonlinear_evals = 0;  // evaluations of grad_x Q
  std::int64_t scf_iterations = 0;
};

// Unpreconditioned conjugate gradient on A(r)x = b(r) starting from x0.
// Stops once |b - Ax|_2 <= tol; the initial residual counts as one matvec,
// each iteration adds one more.
SolveResult cg_solve(const ModelSpec& model, const Vec& r, const Vec& x0,
                     double tol, int max_iter);

// Anderson acceleration of the damped fixed-point map x -> x - alpha*grad_x Q
// with history window `depth` (depth=0 is the plain damped iteration).
// Stops once |grad_x Q|_2 <= tol; one evaluation per iteration plus the
// initial one.
SolveResult anderson_solve(const ModelSpec& model, const Vec& r, const Vec& x0,
                           double tol, double alpha, int depth, int max_iter);

}  // namespace sxlmd
