#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sxlmd/harness.hpp"
#include "sxlmd/io.hpp"

using namespace sxlmd;

namespace {

SimParams quick_params(const std::string& tag, Method method) {
  SimParams p;
  p.method = method;
  p.dt = 1e-3;
  p.t_f = 0.1;
  p.eps = 1e-3;
  p.scf_tol = 1e-10;
  builtin_initial(tag, p.r0, p.p0);
  return p;
}

std::string temp_dir(const char* leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("order estimate recovers synthetic slopes exactly") {
  const std::vector<double> values{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> half, linear;
  for (double v : values) {
    half.push_back(3.7 * std::pow(v, 0.5));
    linear.push_back(0.2 * v);
  }
  CHECK(order_estimate(values, half, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(order_estimate(values, linear, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Scale invariance in the error magnitude.
  std::vector<double> scaled = half;
  for (double& e : scaled) e *= 1e6;
  CHECK(order_estimate(values, scaled, 1.0) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("order estimate honors the fit threshold") {
  // Plateau above the threshold, clean first order below it.
  const std::vector<double> values{1.0, 1e-1, 1e-2, 1e-3};
  const std::vector<double> errors{0.5, 0.5 * 1e-1, 0.5 * 1e-2, 0.5 * 1e-3};
  std::vector<double> contaminated = errors;
  contaminated[0] = 7.0;
  CHECK(order_estimate(values, contaminated, 1e30) != doctest::Approx(1.0));
  CHECK(order_estimate(values, contaminated, 0.5) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("order estimate rejects degenerate inputs") {
  CHECK_THROWS(order_estimate({1e-1}, {1.0}, 1.0));
  CHECK_THROWS(order_estimate({1e-1, 1e-2}, {1.0}, 1.0));
  CHECK_THROWS(order_estimate({1e-1, 1e-2}, {1.0, 0.1}, 1e-3));
  CHECK_THROWS(order_estimate({1e-1, 1e-1}, {1.0, 1.0}, 1.0));
  CHECK_THROWS(order_estimate({1e-1, 1e-2}, {0.0, 0.0}, 1.0));
}

TEST_CASE("ensemble errors against a reference") {
  const ModelSpec m = builtin_model("a");
  const SimParams ref_p = quick_params("a", Method::exact);
  const Trajectory ref = exact_md_run(m, ref_p, 1);

  SimParams p = quick_params("a", Method::sxlmd);
  p.temp = 1e-3;
  p.gamma = 0.5;
  const ErrorReport rep = run_ensemble(m, p, 3, ref, 1, 1);

  CHECK(rep.ensemble_size == 3);
  CHECK(rep.per_seed_sup_r.size() == 3);
  CHECK(rep.sup_r_error > 0.0);
  CHECK(rep.sup_p_error > 0.0);
  CHECK(rep.end_r_error <= rep.sup_r_error + 1e-15);

  double mean = 0.0;
  for (double e : rep.per_seed_sup_r) mean += e;
  mean /= 3.0;
  CHECK(rep.sup_r_error == doctest::Approx(mean).epsilon(1e-12));

  // Different noise streams must produce genuinely different members.
  CHECK(rep.per_seed_sup_r[0] != rep.per_seed_sup_r[1]);

  // A deterministic method collapses the ensemble.
  SimParams d = quick_params("a", Method::xlbomd);
  const ErrorReport drep = run_ensemble(m, d, 2, ref, 1, 1);
  CHECK(drep.per_seed_sup_r[0] == drep.per_seed_sup_r[1]);
}

TEST_CASE("thread count does not change ensemble results") {
  const ModelSpec m = builtin_model("a");
  const Trajectory ref = exact_md_run(m, quick_params("a", Method::exact), 1);
  SimParams p = quick_params("a", Method::sxlmd);
  p.temp = 1e-3;
  const ErrorReport serial = run_ensemble(m, p, 4, ref, 1, 1);
  const ErrorReport threaded = run_ensemble(m, p, 4, ref, 1, 4);
  CHECK(serial.sup_r_error == threaded.sup_r_error);
  CHECK(serial.per_seed_sup_p == threaded.per_seed_sup_p);
}

TEST_CASE("grids sharing fewer than two sample times are rejected") {
  const ModelSpec m = builtin_model("a");
  const Trajectory ref = exact_md_run(m, quick_params("a", Method::exact), 1);
  SimParams p = quick_params("a", Method::xlbomd);
  p.dt = 0.1 / 91.0;  // no grid point beyond t=0 lines up with the reference
  p.t_f = 0.09;
  CHECK_THROWS(run_ensemble(m, p, 1, ref, 1, 1));
}

TEST_CASE("coarser sampling still matches on the shared subset") {
  const ModelSpec m = builtin_model("a");
  const Trajectory ref = exact_md_run(m, quick_params("a", Method::exact), 1);
  SimParams p = quick_params("a", Method::xlbomd);
  const ErrorReport fine = run_ensemble(m, p, 1, ref, 1, 1);
  const ErrorReport coarse = run_ensemble(m, p, 1, ref, 5, 1);
  CHECK(coarse.sup_r_error <= fine.sup_r_error + 1e-15);
  CHECK(coarse.sup_r_error > 0.0);
}

TEST_CASE("sweep varies the requested parameter") {
  const ModelSpec m = builtin_model("a");
  const Trajectory ref = exact_md_run(m, quick_params("a", Method::exact), 1);

  SimParams p = quick_params("a", Method::sxlmd);
  p.temp = 1e-4;
  p.gamma = 0.1;
  const std::vector<double> grid{1e-3, 1e-4};
  const SweepResult res = sweep(m, p, SweepParam::eps, grid, 2, ref, 1, 1);
  CHECK(res.grid == grid);
  CHECK(res.reports.size() == 2);
  // Smaller eps tracks the exact dynamics better on this model.
  CHECK(res.reports[1].sup_r_error < res.reports[0].sup_r_error);

  CHECK_THROWS(sweep(m, p, SweepParam::eps, {}, 1, ref, 1, 1));
  CHECK_THROWS(sweep(m, p, SweepParam::eps, {1e-3, 1e-3}, 1, ref, 1, 1));
  CHECK_THROWS(sweep(m, p, SweepParam::eps, {1e-4, 1e-3, 1e-5}, 1, ref, 1, 1));
}

TEST_CASE("coupled sweep ties the temperature to the mass parameter") {
  const ModelSpec m = builtin_model("a");
  const Trajectory ref = exact_md_run(m, quick_params("a", Method::exact), 1);
  SimParams p = quick_params("a", Method::sxlmd);
  p.gamma = 0.5;
  p.temp = 123.0;  // must be overwritten by the sweep
  const SweepResult res =
      sweep(m, p, SweepParam::eps_with_temp_sqrt, {1e-4}, 1, ref, 1, 1);
  CHECK(res.reports[0].sup_r_error < 1.0);
}

TEST_CASE("efficiency comparison accounts work and errors") {
  const ModelSpec m = builtin_model("a");
  SimParams ref_p = quick_params("a", Method::exact);
  ref_p.dt = 1e-4;
  const Trajectory ref = exact_md_run(m, ref_p, 10);

  SimParams md = quick_params("a", Method::exact);
  md.scf_tol = 1e-8;
  SimParams sx = quick_params("a", Method::sxlmd);
  sx.eps = 1e-4;
  sx.temp = 1e-4;
  sx.gamma = 0.5;

  const CompareResult res = efficiency_compare(m, md, sx, 2, ref, 1, 1);
  CHECK(res.md.counters.matvec_ax > res.sx.counters.matvec_ax);
  CHECK(res.ax_reduction_pct ==
        doctest::Approx(100.0 * (1.0 - double(res.sx.counters.matvec_ax) /
                                           double(res.md.counters.matvec_ax)))
            .epsilon(1e-12));
  const double md_total =
      double(res.md.counters.matvec_ax + res.md.counters.matvec_dax);
  const double sx_total =
      double(res.sx.counters.matvec_ax + res.sx.counters.matvec_dax);
  CHECK(res.total_reduction_pct ==
        doctest::Approx(100.0 * (1.0 - sx_total / md_total)).epsilon(1e-12));

  SimParams clipped = sx;
  clipped.t_f = 0.05;
  CHECK_THROWS(efficiency_compare(m, md, clipped, 1, ref, 1, 1));
}

TEST_CASE("drift analysis fits the second half and finds the band") {
  Trajectory traj;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    traj.times.push_back(t);
    traj.states.emplace_back();
    traj.energy.push_back(2.0 + 0.03 * t);
    traj.latent_ke.push_back(0.0);
  }
  const DriftReport rep = drift_analysis(traj, 2.2, 0.05);
  CHECK(rep.drift_rate == doctest::Approx(0.03).epsilon(1e-10));
  CHECK(rep.n_fit >= 50);
  CHECK(rep.entered_band);
  // Band [2.15, 2.25] is first reached when 2 + 0.03 t >= 2.15.
  CHECK(rep.band_entry_time == doctest::Approx(5.0).epsilon(0.05));

  Trajectory tiny;
  tiny.times = {0.0, 1.0};
  tiny.energy = {1.0, 1.0};
  CHECK_THROWS(drift_analysis(tiny, 1.0, 0.1));
}

TEST_CASE("reference trajectories are cached on disk") {
  const std::string cache = temp_dir("sxlmd_ref_cache_test");
  const ModelSpec m = builtin_model("a");
  SimParams p = quick_params("a", Method::exact);

  const Trajectory first = reference_trajectory(m, p, 2, cache);
  std::size_t n_files = 0;
  std::filesystem::path file;
  for (const auto& e : std::filesystem::directory_iterator(cache)) {
    ++n_files;
    file = e.path();
  }
  REQUIRE(n_files == 1);
  const auto stamp = std::filesystem::last_write_time(file);

  const Trajectory second = reference_trajectory(m, p, 2, cache);
  CHECK(std::filesystem::last_write_time(file) == stamp);
  REQUIRE(second.times.size() == first.times.size());
  for (std::size_t i = 0; i < first.times.size(); ++i) {
    CHECK(second.times[i] == first.times[i]);
    CHECK((second.states[i].r - first.states[i].r).norm() == 0.0);
    CHECK((second.states[i].p - first.states[i].p).norm() == 0.0);
  }

  // A different stride is a different reference.
  reference_trajectory(m, p, 4, cache);
  n_files = 0;
  for ([[maybe_unused]] const auto& e :
       std::filesystem::directory_iterator(cache))
    ++n_files;
  CHECK(n_files == 2);
  std::filesystem::remove_all(cache);
}

TEST_CASE("trajectory csv round-trips losslessly") {
  const ModelSpec m = builtin_model("a");
  SimParams p = quick_params("a", Method::sxlmd);
  p.temp = 1e-3;
  const Trajectory traj = sxlmd_run(m, p, 10);

  const std::string dir = temp_dir("sxlmd_csv_test");
  const std::string path = dir + "/traj.csv";
  write_trajectory_csv(path, traj);
  const Trajectory back = read_trajectory_csv(path);

  REQUIRE(back.times.size() == traj.times.size());
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    CHECK(back.times[i] == traj.times[i]);
    CHECK((back.states[i].r - traj.states[i].r).norm() == 0.0);
    CHECK((back.states[i].p - traj.states[i].p).norm() == 0.0);
    CHECK((back.states[i].x - traj.states[i].x).norm() == 0.0);
    CHECK((back.states[i].y - traj.states[i].y).norm() == 0.0);
    CHECK(back.energy[i] == traj.energy[i]);
    CHECK(back.latent_ke[i] == traj.latent_ke[i]);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("trajectory csv column-count mismatches are detected") {
  const std::string dir = temp_dir("sxlmd_csv_bad");
  const std::string path = dir + "/bad.csv";
  {
    std::ofstream out(path);
    out << "t,r1,p1,energy,latent_ke\n";
    out << "0,1,2,3\n";
  }
  CHECK_THROWS(read_trajectory_csv(path));
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep csv carries detail and summary rows") {
  const ModelSpec m = builtin_model("a");
  const Trajectory ref = exact_md_run(m, quick_params("a", Method::exact), 1);
  SimParams p = quick_params("a", Method::sxlmd);
  p.temp = 1e-3;
  const SweepResult res =
      sweep(m, p, SweepParam::eps, {1e-3, 1e-4}, 2, ref, 1, 1);

  const std::string dir = temp_dir("sxlmd_sweep_csv");
  const std::string path = dir + "/sweep.csv";
  write_sweep_csv(path, res);
  const std::vector<SweepCsvRow> rows = read_sweep_csv(path);

  REQUIRE(rows.size() == 6);  // 2 values x (2 seeds + 1 summary)
  CHECK(rows[0].seed == 0);
  CHECK(rows[1].seed == 1);
  CHECK(rows[2].seed == -1);
  CHECK(rows[2].value == 1e-3);
  CHECK(rows[5].seed == -1);
  CHECK(rows[5].value == 1e-4);
  CHECK(rows[2].sup_r_err ==
        doctest::Approx(0.5 * (rows[0].sup_r_err + rows[1].sup_r_err))
            .epsilon(1e-12));
  CHECK(rows[0].matvec_ax == res.reports[0].counters.matvec_ax);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run config validates its closed schema") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("eps", "abc"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("max_scf_iter", "2.5"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("method", "verlet"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.set("eps", ""), std::invalid_argument);

  cfg.set("eps", "1e-4");
  cfg.set("model", "model_b");
  cfg.set("r0", "0, 0.5, 1");
  CHECK(cfg.get_real("eps", 0.0) == 1e-4);
  CHECK(cfg.get_string("model", "") == "model_b");
  CHECK(cfg.get_reals("r0") == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(cfg.get_int("seed", 42) == 42);
  CHECK_FALSE(cfg.is_set("seed"));
  CHECK_THROWS(cfg.raw("seed"));
}

TEST_CASE("run config dump re-parses identically") {
  RunConfig cfg;
  cfg.set("model", "model_b");
  cfg.set("method", "sxlmd");
  cfg.set("eps", "5e-7");
  cfg.set("r0", "0,0.5,1");
  cfg.set("output", "out.csv");

  const std::string dir = temp_dir("sxlmd_cfg_test");
  const std::string path = dir + "/cfg.txt";
  {
    std::ofstream out(path);
    out << "# a comment line\n\n" << cfg.dump() << "  # trailing comment\n";
  }
  const RunConfig back = RunConfig::from_file(path);
  CHECK(back.dump() == cfg.dump());

  RunConfig merged = back;
  RunConfig overrides;
  overrides.set("eps", "1e-3");
  merged.merge(overrides);
  CHECK(merged.get_real("eps", 0.0) == 1e-3);
  CHECK(merged.get_string("model", "") == "model_b");
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed config files are rejected with the offending key") {
  const std::string dir = temp_dir("sxlmd_cfg_bad");
  const std::string path = dir + "/bad.txt";
  {
    std::ofstream out(path);
    out << "epz = 1e-4\n";
  }
  try {
    RunConfig::from_file(path);
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("epz") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
