#pragma once

#include <vector>

#include "sxlmd/model.hpp"

namespace sxlmd {

// Frozen-configuration Langevin system for the latent pair: at fixed r the
// deviation z = (x - A^{-1}b, y) obeys dz = -Bz dt + noise with
// B = [[0, -I],[A, gamma*I]] and noise intensity diag(0, 2*gamma*T*I).
struct LangevinSystem {
  Mat a;         // A at the frozen r, SPD
  Vec b;
  double gamma = 0.0;
  double temp = 0.0;
  Vec eigenvalues;   // descending, lambda_1 >= ... >= lambda_d
  Mat eigenvectors;  // orthonormal columns, matching order
  Mat basis;         // the 2d x 2d orthogonal block basis that
                     // block-diagonalizes B into 2x2 blocks

  int dim() const { return static_cast<int>(b.size()); }
};

LangevinSystem make_langevin_system(const ModelSpec& model, const Vec& r,
                                    double gamma, double temp);

Mat build_frak_b(const LangevinSystem& sys);

// gamma/4 below critical damping (gamma <= 2*sqrt(kappa)), else
// (gamma - sqrt(gamma^2 - 4*kappa))/4.
double spectral_gap(double gamma, double kappa);

// Closed-form exp(-Bt) assembled from per-eigenvalue 2x2 blocks in the
// orthogonal basis; the critical-damping branch is used when
// |gamma^2 - 4*lambda_k| < 1e-8.
Mat expm_neg_bt(const LangevinSystem& sys, double t);

// Covariance of z(t) started from a point mass:
// Sigma_t = int_0^t exp(-Bs) diag(0, 2*gamma*T*I) exp(-B's) ds,
// by adaptive Gauss-Legendre quadrature to absolute tolerance 1e-12.
Mat sigma_t(const LangevinSystem& sys, double t);

// Stationary covariance: the solution of B*S + S*B' = diag(0, 2*gamma*T*I),
// solved densely via the Kronecker linearization.
Mat sigma_inf(const LangevinSystem& sys);

struct DecayBoundReport {
  double delta = 0.0;  // spectral gap at this system's smallest eigenvalue
  double c1 = 0.0;     // smallest C1 with |exp(-Bt)|_2 <= C1 exp(-delta t)
  double c2 = 0.0;     // smallest C2 with
                       // |Sigma_t - Sigma_inf|_2 <= C2 (gamma/delta) T exp(-2 delta t)
  double c1_binding_t = 0.0;  // grid time where the C1 fit binds
  double c2_binding_t = 0.0;
  int violations = 0;  // grid points above the fitted envelopes (0 when the
                       // exponential bounds hold with the fitted constants)
  std::vector<double> t_grid;
  std::vector<double> expm_norm;       // |exp(-Bt)|_2 per grid point
  std::vector<double> sigma_gap_norm;  // |Sigma_t - Sigma_inf|_2 per point
};

DecayBoundReport decay_bound_check(const LangevinSystem& sys,
                                   const std::vector<double>& t_grid);

// Solution phi of the Poisson equation L0 phi = h - <h> at frozen r, one
// quadratic polynomial in z per force component:
//   phi_k(z) = constant_k + linear_k . z + 1/2 z' quadratic_k z.
struct PoissonSolution {
  std::vector<double> constant;
  std::vector<Vec> linear;     // length 2d each
  std::vector<Mat> quadratic;  // 2d x 2d symmetric each
  Vec x_star;                  // A^{-1} b, the center of the z chart

  double eval(int k, const Vec& x, const Vec& y) const;
};

PoissonSolution poisson_solution(const LangevinSystem& sys,
                                 const ModelSpec& model, const Vec& r);

// L0 phi_k at (x,y), where L0 is the frozen-r generator
// y.grad_x + (b - Ax - gamma y).grad_y + gamma T Laplace_y.
double apply_generator(const LangevinSystem& sys, const PoissonSolution& sol,
                       int k, const Vec& x, const Vec& y);

// Gaussian expectation of phi_k under the invariant density (closed form).
double rho_inf_mean(const LangevinSystem& sys, const PoissonSolution& sol,
                    int k);

// Averaged force <h>(r): F_k - 1/2 Tr[(dA/dr_k) Sigma_inf^{11}]
//   - 1/2 (A^{-1}b)'(dA/dr_k)(A^{-1}b) + (db/dr_k)'A^{-1}b.
Vec averaged_rhs(const LangevinSystem& sys, const ModelSpec& model,
                 const Vec& r);

}  // namespace sxlmd
