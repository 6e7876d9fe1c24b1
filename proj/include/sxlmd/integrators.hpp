#pragma once

#include <cstdint>
#include <vector>

#include "sxlmd/model.hpp"
#include "sxlmd/solvers.hpp"

namespace sxlmd {

enum class Method { exact, xlbomd, sxlmd, averaged };
enum class ScfSolver { cg, anderson };
enum class XInit { scf_exact, offset, explicit_value };
enum class YInit { zero, consistent };

struct SimParams {
  Method method = Method::exact;
  double eps = 1e-4;   // in (0,1); unused by method=exact
  double temp = 0.0;   // >= 0
  double gamma = 0.1;  // > 0 for a live thermostat; 0 allowed (no damping)
  double dt = 5e-6;
  double t_f = 5.0;
  double scf_tol = 1e-10;
  int max_scf_iter = 1000;
  ScfSolver solver = ScfSolver::cg;
  double anderson_alpha = 0.1;
  int anderson_depth = 5;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // trajectory index within an ensemble
  XInit x_init = XInit::scf_exact;
  Vec x_offset;  // added to the solved x(0) when x_init=offset
  Vec x_value;   // taken verbatim when x_init=explicit_value
  YInit y_init = YInit::zero;
  Vec r0, p0;

  void validate(const ModelSpec& model) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<ExtendedState> states;
  std::vector<double> energy;     // physical energy per snapshot
  std::vector<double> latent_ke;  // 1/2|y|^2 per snapshot
  CostCounters counters;
};

// Exact differential-algebraic MD: velocity Verlet on (r,p) with a
// warm-started SCF solve to scf_tol before every force evaluation.
// Throws if the SCF fails to converge, reporting the step index.
Trajectory exact_md_run(const ModelSpec& model, const SimParams& params,
                        int out_stride);

// Verlet on the extended Hamiltonian system (deterministic XL-BOMD).
Trajectory xlbomd_run(const ModelSpec& model, const SimParams& params,
                      int out_stride);

// BAOAB on the stochastic extended system; the Ornstein-Uhlenbeck step acts
// on y only (the noise is degenerate, p is untouched).
Trajectory sxlmd_run(const ModelSpec& model, const SimParams& params,
                     int out_stride);

// Classical RK4 on the averaged limit: rdot = p, pdot = hbar(r) - T*g(r).
Trajectory averaged_run(const ModelSpec& model, const SimParams& params,
                        int out_stride);

// xdot(0) obtained by differentiating the constraint A(r)x = b(r) along
// (r,p); the consistent latent momentum is y(0) = sqrt(eps)*xdot(0).
Vec consistent_latent_velocity(const ModelSpec& model, const Vec& r,
                               const Vec& p, const Vec& x);

}  // namespace sxlmd
