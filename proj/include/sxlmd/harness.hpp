#pragma once

#include <string>
#include <vector>

#include "sxlmd/integrators.hpp"

namespace sxlmd {

// Ensemble error summary against a reference trajectory.  Errors are
// sup-over-shared-sample-times 2-norms; endpoint errors are reported
// alongside for studies that only care about the final state.
struct ErrorReport {
  double sup_r_error = 0.0;  // ensemble mean
  double sup_p_error = 0.0;
  double end_r_error = 0.0;  // at the last shared sample time
  double end_p_error = 0.0;
  int ensemble_size = 0;
  std::vector<double> per_seed_sup_r;
  std::vector<double> per_seed_sup_p;
  CostCounters counters;  // ensemble members perform identical countable
                          // work, so one member's counters represent all
};

enum class SweepParam { eps, temp, gamma, eps_with_temp_sqrt };

struct SweepResult {
  SweepParam param = SweepParam::eps;
  std::vector<double> grid;
  std::vector<ErrorReport> reports;
};

struct CompareResult {
  ErrorReport md;
  ErrorReport sx;
  double ax_reduction_pct = 0.0;     // reduction of A*x products
  double total_reduction_pct = 0.0;  // reduction of A*x + (dA)*x products
  double nonlinear_reduction_pct = 0.0;
};

struct DriftReport {
  double drift_rate = 0.0;  // energy slope over the second half of the run
  double intercept = 0.0;
  long n_fit = 0;
  bool entered_band = false;
  double band_entry_time = 0.0;  // first time |E - ref| <= band half-width
};

// Runs n_seeds trajectories with streams (params.seed, 0..n_seeds-1) and
// reports errors against ref at shared sample times.  n_threads=0 picks the
// SXLMD_THREADS environment override or the hardware concurrency.
ErrorReport run_ensemble(const ModelSpec& model, const SimParams& params,
                         int n_seeds, const Trajectory& ref, int out_stride,
                         int n_threads = 0);

// Least-squares slope of log10(error) vs log10(value) over points with
// value <= threshold; throws if fewer than 2 usable points remain.
double order_estimate(const std::vector<double>& values,
                      const std::vector<double>& errors, double threshold);

SweepResult sweep(const ModelSpec& model, const SimParams& base_params,
                  SweepParam param, const std::vector<double>& grid,
                  int n_seeds, const Trajectory& ref, int out_stride,
                  int n_threads = 0);

// Exact MD vs Stochastic-XLMD work comparison at matched t_f.
CompareResult efficiency_compare(const ModelSpec& model,
                                 const SimParams& md_params,
                                 const SimParams& sxlmd_params, int n_seeds,
                                 const Trajectory& ref, int out_stride,
                                 int n_threads = 0);

DriftReport drift_analysis(const Trajectory& traj, double ref_energy,
                           double band_halfwidth);

// Exact-MD reference trajectory, cached on disk as CSV keyed by the model
// tag, final time, step, tolerance, stride and initial data.
Trajectory reference_trajectory(const ModelSpec& model,
                                const SimParams& ref_params, int out_stride,
                                const std::string& cache_dir);

}  // namespace sxlmd
