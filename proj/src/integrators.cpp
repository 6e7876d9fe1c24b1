#include "sxlmd/integrators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sxlmd/rng.hpp"

namespace sxlmd {

namespace {

long step_count(const SimParams& p) {
  const long n = std::lround(p.t_f / p.dt);
  if (n < 1) throw std::invalid_argument("t_f must cover at least one step");
  return n;
}

// Diagnostic energies and snapshot bookkeeping are not charged to the cost
// counters; only work that propagates the dynamics is.
void record(Trajectory& traj, const ModelSpec& model, const ExtendedState& s) {
  if (!s.r.allFinite() || !s.p.allFinite() ||
      (s.x.size() && !s.x.allFinite()) || (s.y.size() && !s.y.allFinite()))
    throw std::runtime_error("non-finite state at t=" + std::to_string(s.t));
  const EnergyBreakdown e = total_energy(model, s);
  traj.times.push_back(s.t);
  traj.states.push_back(s);
  traj.energy.push_back(e.physical);
  traj.latent_ke.push_back(e.latent_kinetic);
}

SolveResult scf_solve(const ModelSpec& model, const SimParams& params,
                      const Vec& r, const Vec& x0, CostCounters& counters) {
  SolveResult s;
  if (params.solver == ScfSolver::cg) {
    if (model.has_extra_q)
      throw std::invalid_argument(
          "cg solver requires a quadratic interaction energy");
    s = cg_solve(model, r, x0, params.scf_tol, params.max_scf_iter);
    counters.matvec_ax += s.matvec_count;
  } else {
    s = anderson_solve(model, r, x0, params.scf_tol, params.anderson_alpha,
                       params.anderson_depth, params.max_scf_iter);
    counters.matvec_ax += s.matvec_count;
    counters.nonlinear_evals += s.matvec_count;
  }
  counters.scf_iterations += s.iterations;
  return s;
}

// Latent force -grad_x Q; one A*x product, and one nonlinear-oracle call when
// the model carries an extra term.
Vec latent_force(const ModelSpec& model, const Vec& r, const Vec& x,
                 CostCounters& counters) {
  Vec f = -grad_q_x(model, r, x);
  ++counters.matvec_ax;
  if (model.has_extra_q) ++counters.nonlinear_evals;
  return f;
}

Vec nuclear_force(const ModelSpec& model, const Vec& r, const Vec& x,
                  CostCounters& counters) {
  counters.matvec_dax += model.d_r;
  return h_force(model, r, x);
}

Vec initial_latent(const ModelSpec& model, const SimParams& params,
                   CostCounters& counters) {
  if (params.x_init == XInit::explicit_value) {
    if (params.x_value.size() != model.d_x)
      throw std::invalid_argument("x_value has wrong length");
    return params.x_value;
  }
  const SolveResult s =
      scf_solve(model, params, params.r0, Vec::Zero(model.d_x), counters);
  if (!s.converged)
    throw std::runtime_error("initial SCF solve did not converge (step 0)");
  if (params.x_init == XInit::offset) {
    if (params.x_offset.size() != model.d_x)
      throw std::invalid_argument("x_offset has wrong length");
    return s.x + params.x_offset;
  }
  return s.x;
}

// Shared Verlet/BAOAB stepper for the extended system.  XL-BOMD is the
// thermostat-free special case; with gamma=0 the O-step multiplies y by 1 and
// adds 0*noise, so sxlmd(T=0, gamma=0) reproduces xlbomd bit for bit.
Trajectory run_extended(const ModelSpec& model, const SimParams& params,
                        int out_stride, bool thermostat) {
  const long n_steps = step_count(params);
  const double sqrt_eps = std::sqrt(params.eps);
  const double half_dt = 0.5 * params.dt;
  const double half_dt_scaled = half_dt / sqrt_eps;

  Trajectory traj;
  ExtendedState s;
  s.t = 0.0;
  s.r = params.r0;
  s.p = params.p0;
  s.x = initial_latent(model, params, traj.counters);
  s.y = Vec::Zero(model.d_x);
  if (params.y_init == YInit::consistent)
    s.y = sqrt_eps * consistent_latent_velocity(model, s.r, s.p, s.x);

  const double ou_decay =
      thermostat ? std::exp(-params.gamma * params.dt / sqrt_eps) : 1.0;
  const double ou_noise =
      thermostat ? std::sqrt(params.temp * (1.0 - ou_decay * ou_decay)) : 0.0;
  CounterRng rng(params.seed, params.stream);

  Vec fx = latent_force(model, s.r, s.x, traj.counters);
  Vec h = nuclear_force(model, s.r, s.x, traj.counters);
  record(traj, model, s);

  for (long step = 1; step <= n_steps; ++step) {
    s.p += half_dt * h;
    s.y += half_dt_scaled * fx;
    s.r += half_dt * s.p;
    s.x += half_dt_scaled * s.y;
    if (thermostat)
      for (int k = 0; k < model.d_x; ++k)
        s.y[k] = ou_decay * s.y[k] + ou_noise * rng.next_normal();
    s.r += half_dt * s.p;
    s.x += half_dt_scaled * s.y;
    fx = latent_force(model, s.r, s.x, traj.counters);
    h = nuclear_force(model, s.r, s.x, traj.counters);
    s.p += half_dt * h;
    s.y += half_dt_scaled * fx;
    s.t = step * params.dt;
    if (step % out_stride == 0 || step == n_steps) record(traj, model, s);
  }
  return traj;
}

}  // namespace

void SimParams::validate(const ModelSpec& model) const {
  if (dt <= 0.0 || t_f <= 0.0)
    throw std::invalid_argument("dt and t_f must be > 0");
  if (temp < 0.0) throw std::invalid_argument("temp must be >= 0");
  if (max_scf_iter < 1) throw std::invalid_argument("max_scf_iter must be >= 1");
  if (method == Method::xlbomd || method == Method::sxlmd) {
    if (eps <= 0.0 || eps >= 1.0)
      throw std::invalid_argument("eps must lie in (0,1)");
  }
  if (method == Method::sxlmd && gamma < 0.0)
    throw std::invalid_argument("gamma must be >= 0");
  if (r0.size() != model.d_r || p0.size() != model.d_r)
    throw std::invalid_argument("r0/p0 must have length d_r");
}

Trajectory exact_md_run(const ModelSpec& model, const SimParams& params,
                        int out_stride) {
  params.validate(model);
  if (out_stride < 1) throw std::invalid_argument("out_stride must be >= 1");
  const long n_steps = step_count(params);
  const double half_dt = 0.5 * params.dt;

  Trajectory traj;
  ExtendedState s;
  s.t = 0.0;
  s.r = params.r0;
  s.p = params.p0;
  SolveResult scf =
      scf_solve(model, params, s.r, Vec::Zero(model.d_x), traj.counters);
  if (!scf.converged)
    throw std::runtime_error("SCF did not converge at step 0");
  s.x = scf.x;
  s.y = Vec();

  Vec h = nuclear_force(model, s.r, s.x, traj.counters);
  record(traj, model, s);

  for (long step = 1; step <= n_steps; ++step) {
    s.p += half_dt * h;
    s.r += params.dt * s.p;
    scf = scf_solve(model, params, s.r, s.x, traj.counters);
    if (!scf.converged)
      throw std::runtime_error("SCF did not converge at step " +
                               std::to_string(step));
    s.x = scf.x;
    h = nuclear_force(model, s.r, s.x, traj.counters);
    s.p += half_dt * h;
    s.t = step * params.dt;
    if (step % out_stride == 0 || step == n_steps) record(traj, model, s);
  }
  return traj;
}

Trajectory xlbomd_run(const ModelSpec& model, const SimParams& params,
                      int out_stride) {
  params.validate(model);
  if (out_stride < 1) throw std::invalid_argument("out_stride must be >= 1");
  return run_extended(model, params, out_stride, false);
}

Trajectory sxlmd_run(const ModelSpec& model, const SimParams& params,
                     int out_stride) {
  params.validate(model);
  if (out_stride < 1) throw std::invalid_argument("out_stride must be >= 1");
  return run_extended(model, params, out_stride, true);
}

Trajectory averaged_run(const ModelSpec& model, const SimParams& params,
                        int out_stride) {
  params.validate(model);
  if (out_stride < 1) throw std::invalid_argument("out_stride must be >= 1");
  const long n_steps = step_count(params);
  const double temp = params.temp;

  auto accel = [&](const Vec& r) {
    Vec a = hbar_force(model, r);
    if (temp != 0.0) a -= temp * g_vector(model, r);
    return a;
  };
  // Snapshots report the on-constraint latent state so energies are
  // comparable with the other methods.
  auto snapshot = [&](Trajectory& traj, ExtendedState& s) {
    Eigen::LLT<Mat> llt(model.matrix_a(s.r));
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("A(r) is not positive definite");
    s.x = llt.solve(model.vector_b(s.r));
    record(traj, model, s);
  };

  Trajectory traj;
  ExtendedState s;
  s.t = 0.0;
  s.r = params.r0;
  s.p = params.p0;
  s.x = Vec::Zero(model.d_x);
  s.y = Vec();
  snapshot(traj, s);

  const double dt = params.dt;
  for (long step = 1; step <= n_steps; ++step) {
    const Vec k1r = s.p;
    const Vec k1p = accel(s.r);
    const Vec k2r = s.p + 0.5 * dt * k1p;
    const Vec k2p = accel(s.r + 0.5 * dt * k1r);
    const Vec k3r = s.p + 0.5 * dt * k2p;
    const Vec k3p = accel(s.r + 0.5 * dt * k2r);
    const Vec k4r = s.p + dt * k3p;
    const Vec k4p = accel(s.r + dt * k3r);
    s.r += (dt / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
    s.p += (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    s.t = step * dt;
    if (step % out_stride == 0 || step == n_steps) snapshot(traj, s);
  }
  return traj;
}

Vec consistent_latent_velocity(const ModelSpec& model, const Vec& r,
                               const Vec& p, const Vec& x) {
  Vec rhs = Vec::Zero(model.d_x);
  for (int k = 0; k < model.d_r; ++k)
    rhs += p[k] * (model.db_dr(r, k) - model.da_dr(r, k) * x);
  Eigen::LLT<Mat> llt(model.matrix_a(r));
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("A(r) is not positive definite");
  return llt.solve(rhs);
}

}  // namespace sxlmd
