#include "sxlmd/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "sxlmd/io.hpp"

namespace sxlmd {

namespace {

Trajectory dispatch_run(const ModelSpec& model, const SimParams& params,
                        int out_stride) {
  switch (params.method) {
    case Method::exact:
      return exact_md_run(model, params, out_stride);
    case Method::xlbomd:
      return xlbomd_run(model, params, out_stride);
    case Method::sxlmd:
      return sxlmd_run(model, params, out_stride);
    case Method::averaged:
      return averaged_run(model, params, out_stride);
  }
  throw std::logic_error("unreachable method");
}

struct GridErrors {
  double sup_r = 0.0, sup_p = 0.0;
  double end_r = 0.0, end_p = 0.0;
};

// Sample times are step multiples of two different dt values, so shared
// times are identified with a small absolute tolerance rather than bitwise.
GridErrors compare_on_shared_grid(const Trajectory& traj,
                                  const Trajectory& ref) {
  GridErrors out;
  std::size_t i = 0, j = 0;
  long matched = 0;
  while (i < traj.times.size() && j < ref.times.size()) {
    const double ti = traj.times[i];
    const double tj = ref.times[j];
    if (std::abs(ti - tj) <= 1e-9 * (1.0 + std::abs(ti))) {
      const double er = (traj.states[i].r - ref.states[j].r).norm();
      const double ep = (traj.states[i].p - ref.states[j].p).norm();
      out.sup_r = std::max(out.sup_r, er);
      out.sup_p = std::max(out.sup_p, ep);
      out.end_r = er;
      out.end_p = ep;
      ++matched;
      ++i;
      ++j;
    } else if (ti < tj) {
      ++i;
    } else {
      ++j;
    }
  }
  if (matched < 2)
    throw std::runtime_error(
        "trajectory and reference share fewer than 2 sample times");
  return out;
}

int resolve_threads(int requested, int n_tasks) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("SXLMD_THREADS")) n = std::atoi(env);
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
  }
  return std::max(1, std::min(n, n_tasks));
}

}  // namespace

ErrorReport run_ensemble(const ModelSpec& model, const SimParams& params,
                         int n_seeds, const Trajectory& ref, int out_stride,
                         int n_threads) {
  if (n_seeds < 1) throw std::invalid_argument("n_seeds must be >= 1");
  std::vector<GridErrors> errors(n_seeds);
  std::vector<CostCounters> counters(n_seeds);

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_seeds) return;
      try {
        SimParams p = params;
        p.stream = static_cast<std::uint64_t>(i);
        const Trajectory traj = dispatch_run(model, p, out_stride);
        errors[i] = compare_on_shared_grid(traj, ref);
        counters[i] = traj.counters;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int threads = resolve_threads(n_threads, n_seeds);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ErrorReport rep;
  rep.ensemble_size = n_seeds;
  rep.counters = counters[0];
  for (const GridErrors& e : errors) {
    rep.per_seed_sup_r.push_back(e.sup_r);
    rep.per_seed_sup_p.push_back(e.sup_p);
    rep.sup_r_error += e.sup_r;
    rep.sup_p_error += e.sup_p;
    rep.end_r_error += e.end_r;
    rep.end_p_error += e.end_p;
  }
  rep.sup_r_error /= n_seeds;
  rep.sup_p_error /= n_seeds;
  rep.end_r_error /= n_seeds;
  rep.end_p_error /= n_seeds;
  return rep;
}

double order_estimate(const std::vector<double>& values,
                      const std::vector<double>& errors, double threshold) {
  if (values.size() != errors.size())
    throw std::invalid_argument("order_estimate: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] <= threshold && values[i] > 0.0 && errors[i] > 0.0) {
      lx.push_back(std::log10(values[i]));
      ly.push_back(std::log10(errors[i]));
    }
  }
  const std::size_t n = lx.size();
  if (n < 2)
    throw std::invalid_argument(
        "order_estimate: fewer than 2 usable points below threshold");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0)
    throw std::invalid_argument("order_estimate: degenerate value grid");
  return sxy / sxx;
}

SweepResult sweep(const ModelSpec& model, const SimParams& base_params,
                  SweepParam param, const std::vector<double>& grid,
                  int n_seeds, const Trajectory& ref, int out_stride,
                  int n_threads) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if ((grid[i] - grid[i - 1]) * (grid[1] - grid[0]) <= 0.0)
      throw std::invalid_argument("sweep: grid must be strictly monotone");

  SweepResult result;
  result.param = param;
  result.grid = grid;
  for (double v : grid) {
    SimParams p = base_params;
    switch (param) {
      case SweepParam::eps:
        p.eps = v;
        break;
      case SweepParam::temp:
        p.temp = v;
        break;
      case SweepParam::gamma:
        p.gamma = v;
        break;
      case SweepParam::eps_with_temp_sqrt:
        p.eps = v;
        p.temp = std::sqrt(v);
        break;
    }
    result.reports.push_back(
        run_ensemble(model, p, n_seeds, ref, out_stride, n_threads));
  }
  return result;
}

CompareResult efficiency_compare(const ModelSpec& model,
                                 const SimParams& md_params,
                                 const SimParams& sxlmd_params, int n_seeds,
                                 const Trajectory& ref, int out_stride,
                                 int n_threads) {
  if (std::abs(md_params.t_f - sxlmd_params.t_f) >
      1e-12 * (1.0 + std::abs(md_params.t_f)))
    throw std::invalid_argument("efficiency_compare: t_f mismatch");
  CompareResult out;
  out.md = run_ensemble(model, md_params, 1, ref, out_stride, n_threads);
  out.sx =
      run_ensemble(model, sxlmd_params, n_seeds, ref, out_stride, n_threads);

  auto pct = [](std::int64_t base, std::int64_t reduced) {
    return base > 0 ? 100.0 * (1.0 - static_cast<double>(reduced) /
                                         static_cast<double>(base))
                    : 0.0;
  };
  out.ax_reduction_pct = pct(out.md.counters.matvec_ax, out.sx.counters.matvec_ax);
  out.total_reduction_pct =
      pct(out.md.counters.matvec_ax + out.md.counters.matvec_dax,
          out.sx.counters.matvec_ax + out.sx.counters.matvec_dax);
  out.nonlinear_reduction_pct =
      pct(out.md.counters.nonlinear_evals, out.sx.counters.nonlinear_evals);
  return out;
}

DriftReport drift_analysis(const Trajectory& traj, double ref_energy,
                           double band_halfwidth) {
  const std::size_t n = traj.times.size();
  if (n < 4) throw std::invalid_argument("drift_analysis: too few samples");

  DriftReport rep;
  const double t_mid = 0.5 * traj.times.back();
  double mx = 0.0, my = 0.0;
  rep.n_fit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (traj.times[i] < t_mid) continue;
    mx += traj.times[i];
    my += traj.energy[i];
    ++rep.n_fit;
  }
  if (rep.n_fit < 2)
    throw std::invalid_argument("drift_analysis: too few samples in fit window");
  mx /= rep.n_fit;
  my /= rep.n_fit;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (traj.times[i] < t_mid) continue;
    sxx += (traj.times[i] - mx) * (traj.times[i] - mx);
    sxy += (traj.times[i] - mx) * (traj.energy[i] - my);
  }
  rep.drift_rate = sxy / sxx;
  rep.intercept = my - rep.drift_rate * mx;

  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(traj.energy[i] - ref_energy) <= band_halfwidth) {
      rep.entered_band = true;
      rep.band_entry_time = traj.times[i];
      break;
    }
  }
  return rep;
}

Trajectory reference_trajectory(const ModelSpec& model,
                                const SimParams& ref_params, int out_stride,
                                const std::string& cache_dir) {
  char buf[64];
  std::string key = model.name;
  auto add_real = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "|%s=%.17g", name, v);
    key += buf;
  };
  add_real("tf", ref_params.t_f);
  add_real("dt", ref_params.dt);
  add_real("tol", ref_params.scf_tol);
  key += "|stride=" + std::to_string(out_stride);
  key += ref_params.solver == ScfSolver::cg ? "|cg" : "|anderson";
  for (int k = 0; k < ref_params.r0.size(); ++k) add_real("r", ref_params.r0[k]);
  for (int k = 0; k < ref_params.p0.size(); ++k) add_real("p", ref_params.p0[k]);

  std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(key));
  std::filesystem::create_directories(cache_dir);
  const std::string path =
      cache_dir + "/ref_" + model.name + "_" + buf + ".csv";

  if (std::filesystem::exists(path)) return read_trajectory_csv(path);

  SimParams p = ref_params;
  p.method = Method::exact;
  const Trajectory traj = exact_md_run(model, p, out_stride);
  write_trajectory_csv(path, traj);
  return traj;
}

}  // namespace sxlmd
