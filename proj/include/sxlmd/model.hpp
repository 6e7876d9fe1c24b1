#pragma once

#include <functional>
#include <string>

#include "sxlmd/linalg.hpp"

namespace sxlmd {

// A latent-variable force field.  The nuclear coordinates r in R^{d_r} carry
// a direct potential U, and the latent coordinates x in R^{d_x} enter through
// the quadratic energy Q(r,x) = 1/2 x'A(r)x - b(r)'x (+ an optional separable
// extra term).  A(r) must stay symmetric positive definite with smallest
// eigenvalue >= kappa on the region of interest.
struct ModelSpec {
  std::string name;
  int d_r = 0;
  int d_x = 0;

  std::function<double(const Vec&)> potential;           // U(r)
  std::function<Vec(const Vec&)> force;                  // -grad U
  std::function<Mat(const Vec&)> matrix_a;               // A(r)
  std::function<Vec(const Vec&)> vector_b;               // b(r)
  std::function<Mat(const Vec&, int)> da_dr;             // dA/dr_k
  std::function<Vec(const Vec&, int)> db_dr;             // db/dr_k

  // Optional separable extra term E(x) = sum_k e(x_k); empty means Q is the
  // plain quadratic.  grad and hessian diagonal are analytic.
  bool has_extra_q = false;
  std::function<double(const Vec&)> extra_q;
  std::function<Vec(const Vec&)> extra_q_grad;
  std::function<Vec(const Vec&)> extra_q_hess_diag;

  // Uniform convexity constant of Q in x (lower bound on eigenvalues of A).
  double kappa = 0.0;
};

// Phase-space point of the extended system.  Exact MD leaves y empty of
// meaning but keeps the storage so trajectories share one layout.
struct ExtendedState {
  double t = 0.0;
  Vec r, p, x, y;
};

struct EnergyBreakdown {
  double physical = 0.0;        // 1/2|p|^2 + U(r) + Q(r,x)
  double latent_kinetic = 0.0;  // 1/2|y|^2, reported separately
};

// Gradient of Q with respect to x: A(r)x - b(r) (+ extra term when present).
Vec grad_q_x(const ModelSpec& model, const Vec& r, const Vec& x);

// Force on r at fixed latent state:
//   h_k = F_k - 1/2 x'(dA/dr_k)x + (db/dr_k)'x.
Vec h_force(const ModelSpec& model, const Vec& r, const Vec& x);

// Force on r along the constraint manifold x = A^{-1}b:
//   hbar_k = F_k - 1/2 b'A^{-1}(dA/dr_k)A^{-1}b + (db/dr_k)'A^{-1}b.
Vec hbar_force(const ModelSpec& model, const Vec& r);

// Curvature correction g_k = 1/2 Tr[(dA/dr_k) A^{-1}].
Vec g_vector(const ModelSpec& model, const Vec& r);

EnergyBreakdown total_energy(const ModelSpec& model, const ExtendedState& s);

// Built-in benchmark models "a", "b", "c".  Model "b" has a documented
// ambiguity in its coupling vector; variant_r1 switches the first argument
// slot of b_k from r_2 to r_1 (default keeps the published form).
ModelSpec builtin_model(const std::string& tag, bool b_variant_r1 = false);

// Canonical initial nuclear data used by the built-in experiments.
void builtin_initial(const std::string& tag, Vec& r0, Vec& p0);

// Freezes A, b at the given r (zero derivatives, zero direct force), which
// turns the latent pair into an autonomous Langevin system.  Used by the
// frozen-configuration statistics checks.
ModelSpec frozen_model(const ModelSpec& model, const Vec& r_frozen);

}  // namespace sxlmd
