#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sxlmd/harness.hpp"
#include "sxlmd/io.hpp"
#include "sxlmd/langevin.hpp"
#include "sxlmd/rng.hpp"

namespace {

using namespace sxlmd;

std::string real_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_kv(const std::string& key, double v) {
  std::printf("%s=%.17g\n", key.c_str(), v);
}

void print_kv(const std::string& key, std::int64_t v) {
  std::printf("%s=%" PRId64 "\n", key.c_str(), v);
}

void print_counters(const std::string& prefix, const CostCounters& c) {
  print_kv(prefix + "matvec_ax", c.matvec_ax);
  print_kv(prefix + "matvec_dax", c.matvec_dax);
  print_kv(prefix + "nonlinear_evals", c.nonlinear_evals);
  print_kv(prefix + "scf_iterations", c.scf_iterations);
}

void apply_defaults(RunConfig& cfg, const std::string& command) {
  auto put = [&cfg](const char* key, const char* value) {
    if (!cfg.is_set(key)) cfg.set(key, value);
  };
  put("model", "model_a");
  put("b_variant", "r2");
  put("method", "sxlmd");
  put("eps", "1e-4");
  put("temp", "0");
  put("gamma", "0.1");
  put("dt", "4e-4");
  put("tf", "5");
  put("scf_tol", "1e-6");
  put("max_scf_iter", "1000");
  put("solver", "cg");
  put("anderson_alpha", "0.1");
  put("anderson_depth", "5");
  put("seed", "0");
  put("x_init", "scf");
  put("y_init", "zero");
  put("out_stride", "1");
  put("ensemble", "1");
  put("threads", "0");
  if (command == "run") put("output", "trajectory.csv");
  if (command == "sweep") {
    put("output", "sweep.csv");
    put("sweep_param", "eps");
  }
  if (command == "sweep" || command == "compare") {
    put("ref_dt", "5e-6");
    put("ref_scf_tol", "1e-10");
    put("ref_cache", "ref_cache");
  }
  if (command == "compare") {
    put("md_dt", "4e-4");
    put("md_scf_tol", "1e-6");
  }
  if (command == "langevin") {
    put("t_max", "10");
    put("n_t", "20");
  }
}

ModelSpec model_from(const RunConfig& cfg) {
  return builtin_model(cfg.get_string("model", "model_a"),
                       cfg.get_string("b_variant", "r2") == "r1");
}

Method parse_method(const std::string& s) {
  if (s == "exact") return Method::exact;
  if (s == "xlbomd") return Method::xlbomd;
  if (s == "sxlmd") return Method::sxlmd;
  if (s == "averaged") return Method::averaged;
  throw std::invalid_argument("method: unknown value '" + s + "'");
}

Vec vec_from(const std::vector<double>& v, long want, const char* key) {
  if (static_cast<long>(v.size()) == want)
    return Eigen::Map<const Vec>(v.data(), want);
  if (v.size() == 1) return Vec::Constant(want, v[0]);
  throw std::invalid_argument(std::string(key) + ": expected " +
                              std::to_string(want) + " components, got " +
                              std::to_string(v.size()));
}

SimParams params_from(const RunConfig& cfg, const ModelSpec& model) {
  SimParams p;
  p.method = parse_method(cfg.get_string("method", "sxlmd"));
  p.eps = cfg.get_real("eps", p.eps);
  p.temp = cfg.get_real("temp", p.temp);
  p.gamma = cfg.get_real("gamma", p.gamma);
  p.dt = cfg.get_real("dt", p.dt);
  p.t_f = cfg.get_real("tf", p.t_f);
  p.scf_tol = cfg.get_real("scf_tol", 1e-6);
  p.max_scf_iter = static_cast<int>(cfg.get_int("max_scf_iter", 1000));
  p.solver = cfg.get_string("solver", "cg") == "anderson" ? ScfSolver::anderson
                                                          : ScfSolver::cg;
  p.anderson_alpha = cfg.get_real("anderson_alpha", 0.1);
  p.anderson_depth = static_cast<int>(cfg.get_int("anderson_depth", 5));
  p.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));

  const std::string xi = cfg.get_string("x_init", "scf");
  if (xi == "scf") {
    p.x_init = XInit::scf_exact;
  } else if (xi == "offset") {
    p.x_init = XInit::offset;
    p.x_offset = vec_from(cfg.get_reals("x_offset"), model.d_x, "x_offset");
  } else {
    p.x_init = XInit::explicit_value;
    p.x_value = vec_from(cfg.get_reals("x_value"), model.d_x, "x_value");
  }
  p.y_init = cfg.get_string("y_init", "zero") == "consistent"
                 ? YInit::consistent
                 : YInit::zero;

  if (cfg.is_set("r0") || cfg.is_set("p0")) {
    p.r0 = vec_from(cfg.get_reals("r0"), model.d_r, "r0");
    p.p0 = vec_from(cfg.get_reals("p0"), model.d_r, "p0");
  } else {
    builtin_initial(model.name, p.r0, p.p0);
  }
  return p;
}

Trajectory run_by_method(const ModelSpec& model, const SimParams& p,
                         int out_stride) {
  switch (p.method) {
    case Method::exact:
      return exact_md_run(model, p, out_stride);
    case Method::xlbomd:
      return xlbomd_run(model, p, out_stride);
    case Method::sxlmd:
      return sxlmd_run(model, p, out_stride);
    case Method::averaged:
      return averaged_run(model, p, out_stride);
  }
  throw std::logic_error("unreachable method");
}

// Reference sampling stride such that ref_dt*stride equals the sampling
// interval of the compared run; throws when ref_dt does not divide it.
int ref_stride_for(double sample_interval, double ref_dt) {
  const long long n = std::llround(sample_interval / ref_dt);
  if (n < 1 || std::abs(n * ref_dt - sample_interval) >
                   1e-9 * std::abs(sample_interval))
    throw std::invalid_argument(
        "ref_dt must divide the sampling interval dt*out_stride");
  return static_cast<int>(n);
}

int cmd_run(const RunConfig& cfg) {
  const ModelSpec model = model_from(cfg);
  const SimParams p = params_from(cfg, model);
  const int stride = static_cast<int>(cfg.get_int("out_stride", 1));
  const Trajectory traj = run_by_method(model, p, stride);
  write_trajectory_csv(cfg.raw("output"), traj);
  print_kv("final_time", traj.times.back());
  print_kv("final_energy", traj.energy.back());
  print_kv("final_latent_ke", traj.latent_ke.back());
  print_counters("", traj.counters);
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  const ModelSpec model = model_from(cfg);
  const SimParams p = params_from(cfg, model);
  const std::vector<double> grid = cfg.get_reals("sweep_grid");
  if (grid.empty())
    throw std::invalid_argument("sweep_grid: required for sweep");

  const std::string pw = cfg.get_string("sweep_param", "eps");
  SweepParam param = SweepParam::eps;
  if (pw == "temp") param = SweepParam::temp;
  if (pw == "gamma") param = SweepParam::gamma;
  if (pw == "eps_coupled") param = SweepParam::eps_with_temp_sqrt;

  const int stride = static_cast<int>(cfg.get_int("out_stride", 1));
  SimParams rp = p;
  rp.dt = cfg.get_real("ref_dt", 5e-6);
  rp.scf_tol = cfg.get_real("ref_scf_tol", 1e-10);
  const int rstride = ref_stride_for(p.dt * stride, rp.dt);
  const Trajectory ref = reference_trajectory(
      model, rp, rstride, cfg.get_string("ref_cache", "ref_cache"));

  const SweepResult result =
      sweep(model, p, param, grid, static_cast<int>(cfg.get_int("ensemble", 1)),
            ref, stride, static_cast<int>(cfg.get_int("threads", 0)));
  write_sweep_csv(cfg.raw("output"), result);

  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    const ErrorReport& rep = result.reports[i];
    std::printf(
        "value=%.17g sup_r_err=%.17g sup_p_err=%.17g end_r_err=%.17g "
        "end_p_err=%.17g matvec_ax=%" PRId64 " matvec_dax=%" PRId64
        " nonlinear_evals=%" PRId64 "\n",
        result.grid[i], rep.sup_r_error, rep.sup_p_error, rep.end_r_error,
        rep.end_p_error, rep.counters.matvec_ax, rep.counters.matvec_dax,
        rep.counters.nonlinear_evals);
  }
  return 0;
}

int cmd_order(const RunConfig& cfg) {
  const std::vector<SweepCsvRow> rows = read_sweep_csv(cfg.raw("input"));
  std::vector<double> values, err_r, err_p;
  for (const SweepCsvRow& row : rows) {
    if (row.seed != -1) continue;
    values.push_back(row.value);
    err_r.push_back(row.sup_r_err);
    err_p.push_back(row.sup_p_err);
  }
  const double threshold =
      cfg.get_real("fit_threshold", std::numeric_limits<double>::infinity());
  std::printf("order_r=%.12g\n", order_estimate(values, err_r, threshold));
  std::printf("order_p=%.12g\n", order_estimate(values, err_p, threshold));
  return 0;
}

int cmd_compare(const RunConfig& cfg) {
  const ModelSpec model = model_from(cfg);
  SimParams sx = params_from(cfg, model);
  sx.method = Method::sxlmd;

  SimParams md = sx;
  md.method = Method::exact;
  md.dt = cfg.get_real("md_dt", 4e-4);
  md.scf_tol = cfg.get_real("md_scf_tol", 1e-6);

  const int stride = static_cast<int>(cfg.get_int("out_stride", 1));
  SimParams rp = sx;
  rp.dt = cfg.get_real("ref_dt", 5e-6);
  rp.scf_tol = cfg.get_real("ref_scf_tol", 1e-10);
  const int rstride = ref_stride_for(sx.dt * stride, rp.dt);
  const Trajectory ref = reference_trajectory(
      model, rp, rstride, cfg.get_string("ref_cache", "ref_cache"));

  const CompareResult res = efficiency_compare(
      model, md, sx, static_cast<int>(cfg.get_int("ensemble", 1)), ref, stride,
      static_cast<int>(cfg.get_int("threads", 0)));

  print_kv("md_sup_r_err", res.md.sup_r_error);
  print_kv("md_sup_p_err", res.md.sup_p_error);
  print_kv("sx_sup_r_err", res.sx.sup_r_error);
  print_kv("sx_sup_p_err", res.sx.sup_p_error);
  print_counters("md_", res.md.counters);
  print_counters("sx_", res.sx.counters);
  print_kv("ax_reduction_pct", res.ax_reduction_pct);
  print_kv("total_reduction_pct", res.total_reduction_pct);
  print_kv("nonlinear_reduction_pct", res.nonlinear_reduction_pct);
  return 0;
}

int cmd_langevin(const RunConfig& cfg) {
  const ModelSpec model = model_from(cfg);
  SimParams p = params_from(cfg, model);
  const double gamma = cfg.get_real("gamma", 0.1);
  const double temp = cfg.get_real("temp", 0.0);
  const LangevinSystem sys = make_langevin_system(model, p.r0, gamma, temp);

  const int d = sys.dim();
  print_kv("lambda_min", sys.eigenvalues[d - 1]);
  print_kv("lambda_max", sys.eigenvalues[0]);
  print_kv("spectral_gap", spectral_gap(gamma, sys.eigenvalues[d - 1]));

  const Mat frak_b = build_frak_b(sys);
  const Mat s_inf = sigma_inf(sys);
  Mat noise = Mat::Zero(2 * d, 2 * d);
  noise.bottomRightCorner(d, d) =
      2.0 * gamma * temp * Mat::Identity(d, d);
  print_kv("sigma_lyapunov_residual",
           (frak_b * s_inf + s_inf * frak_b.transpose() - noise).norm());
  Mat closed = Mat::Zero(2 * d, 2 * d);
  closed.topLeftCorner(d, d) =
      temp * sys.a.llt().solve(Mat::Identity(d, d));
  closed.bottomRightCorner(d, d) = temp * Mat::Identity(d, d);
  print_kv("sigma_closed_form_gap", (s_inf - closed).norm());

  const double t_max = cfg.get_real("t_max", 10.0);
  const int n_t = static_cast<int>(cfg.get_int("n_t", 20));
  if (t_max <= 0.0 || n_t < 2)
    throw std::invalid_argument("t_max must be > 0 and n_t >= 2");
  std::vector<double> grid(n_t);
  for (int i = 0; i < n_t; ++i) grid[i] = t_max * (i + 1) / n_t;

  const DecayBoundReport rep = decay_bound_check(sys, grid);
  print_kv("c1", rep.c1);
  print_kv("c2", rep.c2);
  print_kv("envelope_violations", static_cast<std::int64_t>(rep.violations));
  std::printf("# %12s %16s %16s\n", "t", "expm_norm", "c1_envelope");
  for (std::size_t i = 0; i < rep.t_grid.size(); ++i)
    std::printf("  %12.6f %16.8e %16.8e\n", rep.t_grid[i], rep.expm_norm[i],
                rep.c1 * std::exp(-rep.delta * rep.t_grid[i]));

  const PoissonSolution sol = poisson_solution(sys, model, p.r0);
  const Vec rhs = averaged_rhs(sys, model, p.r0);
  CounterRng rng(p.seed, 0);
  double gen_residual = 0.0, mean_residual = 0.0;
  for (int k = 0; k < model.d_r; ++k)
    mean_residual = std::max(mean_residual,
                             std::abs(rho_inf_mean(sys, sol, k)));
  for (int s = 0; s < 64; ++s) {
    Vec x(d), y(d);
    for (int i = 0; i < d; ++i) x[i] = sol.x_star[i] + rng.next_normal();
    for (int i = 0; i < d; ++i) y[i] = rng.next_normal();
    const Vec h = h_force(model, p.r0, x);
    for (int k = 0; k < model.d_r; ++k)
      gen_residual =
          std::max(gen_residual, std::abs(apply_generator(sys, sol, k, x, y) -
                                          (h[k] - rhs[k])));
  }
  print_kv("poisson_generator_residual", gen_residual);
  print_kv("poisson_mean_residual", mean_residual);
  for (int k = 0; k < model.d_r; ++k)
    print_kv("averaged_rhs_" + std::to_string(k + 1), rhs[k]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-variable molecular dynamics: exact, extended-Lagrangian "
               "and stochastic integrators with an experiment harness"};
  app.require_subcommand(1);

  std::string config_path;
  bool dump = false;
  RunConfig overrides;
  std::string parse_error;

  auto add_all = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "configuration file ('key = value' lines, '#' comments)");
    sub->add_flag("--dump-config", dump,
                  "print the effective configuration and exit");
    for (const std::string& key : RunConfig::known_keys()) {
      std::string names = "--" + key;
      std::string dashed = key;
      for (char& c : dashed)
        if (c == '_') c = '-';
      if (dashed != key) names = "--" + dashed + "," + names;
      sub->add_option_function<std::string>(
          names,
          [&overrides, key](const std::string& v) { overrides.set(key, v); },
          "configuration key " + key);
    }
  };

  CLI::App* c_run = app.add_subcommand(
      "run", "integrate one trajectory and write it as CSV");
  CLI::App* c_sweep = app.add_subcommand(
      "sweep", "ensemble errors against a reference over a parameter grid");
  CLI::App* c_order = app.add_subcommand(
      "order", "fit a convergence order to a sweep CSV");
  CLI::App* c_compare = app.add_subcommand(
      "compare", "cost and accuracy of exact MD vs the stochastic method");
  CLI::App* c_langevin = app.add_subcommand(
      "langevin", "frozen-configuration decay and averaging diagnostics");
  for (CLI::App* sub : {c_run, c_sweep, c_order, c_compare, c_langevin})
    add_all(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
    cfg.merge(overrides);

    const CLI::App* sub = app.get_subcommands().front();
    apply_defaults(cfg, sub->get_name());
    if (dump) {
      std::cout << cfg.dump();
      return 0;
    }
    if (sub == c_run) return cmd_run(cfg);
    if (sub == c_sweep) return cmd_sweep(cfg);
    if (sub == c_order) return cmd_order(cfg);
    if (sub == c_compare) return cmd_compare(cfg);
    return cmd_langevin(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
