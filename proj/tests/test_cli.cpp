#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sxlmd/harness.hpp"
#include "sxlmd/io.hpp"

namespace {

struct CmdResult {
  int status = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const char* leaf) {
  const auto dir = std::filesystem::temp_directory_path() / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

CmdResult run_cli(const std::filesystem::path& dir, const std::string& args) {
  const std::string cmd = "cd " + dir.string() + " && " + SXLMD_CLI_PATH + " " +
                          args + " > stdout.txt 2> stderr.txt";
  const int rc = std::system(cmd.c_str());
  CmdResult res;
  res.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.out = slurp(dir / "stdout.txt");
  res.err = slurp(dir / "stderr.txt");
  return res;
}

double parse_value(const std::string& text, const std::string& key) {
  const std::string needle = key + "=";
  const std::size_t pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + needle.size()));
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("run emits the documented trajectory csv") {
  const auto dir = fresh_dir("sxlmd_cli_run");
  const CmdResult res = run_cli(
      dir,
      "run --model a --method xlbomd --eps 1e-3 --dt 4e-4 --tf 0.1 "
      "--output traj.csv");
  CHECK(res.status == 0);
  CHECK(line_count(dir / "traj.csv") == 252);  // header + 250 steps + t=0

  std::ifstream in(dir / "traj.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,r1,r2,p1,p2,x1,x2,y1,y2,energy,latent_ke");
  CHECK(res.out.find("matvec_ax=") != std::string::npos);
  CHECK(res.out.find("scf_iterations=") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("seeded runs are byte-identical") {
  const auto dir = fresh_dir("sxlmd_cli_det");
  const std::string args =
      "run --model a --method sxlmd --eps 1e-4 --temp 1e-4 --gamma 0.1 "
      "--seed 7 --dt 1e-3 --tf 0.2 --output rep.csv";
  const CmdResult first = run_cli(dir, args);
  const std::string csv_first = slurp(dir / "rep.csv");
  const CmdResult second = run_cli(dir, args);
  CHECK(first.status == 0);
  CHECK(second.status == 0);
  CHECK(first.out == second.out);
  CHECK(csv_first == slurp(dir / "rep.csv"));
  CHECK(!csv_first.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("derivative-product accounting is visible at the interface") {
  const auto dir = fresh_dir("sxlmd_cli_count");
  const CmdResult res = run_cli(
      dir,
      "run --model b --method exact --dt 4e-4 --tf 1 --scf-tol 1e-6 "
      "--out-stride 100 --output b.csv");
  CHECK(res.status == 0);
  CHECK(parse_value(res.out, "matvec_dax") == 3 * 2501);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep csv and the order post-processor agree with the library") {
  const auto dir = fresh_dir("sxlmd_cli_sweep");
  const CmdResult sw = run_cli(
      dir,
      "sweep --model a --method sxlmd --sweep-param eps "
      "--sweep-grid 1e-3,1e-4 --temp 1e-3 --gamma 0.5 --dt 1e-3 --tf 0.1 "
      "--ensemble 2 --ref-dt 1e-3 --output sw.csv --ref-cache cache");
  CHECK(sw.status == 0);
  CHECK(line_count(dir / "sw.csv") == 7);  // header + 2x(2 detail + summary)

  const CmdResult ord = run_cli(dir, "order --input sw.csv");
  CHECK(ord.status == 0);

  const auto rows = sxlmd::read_sweep_csv((dir / "sw.csv").string());
  std::vector<double> values, err_r, err_p;
  for (const auto& row : rows) {
    if (row.seed != -1) continue;
    values.push_back(row.value);
    err_r.push_back(row.sup_r_err);
    err_p.push_back(row.sup_p_err);
  }
  const double want_r = sxlmd::order_estimate(
      values, err_r, std::numeric_limits<double>::infinity());
  const double want_p = sxlmd::order_estimate(
      values, err_p, std::numeric_limits<double>::infinity());
  CHECK(parse_value(ord.out, "order_r") == doctest::Approx(want_r).epsilon(1e-9));
  CHECK(parse_value(ord.out, "order_p") == doctest::Approx(want_p).epsilon(1e-9));
  std::filesystem::remove_all(dir);
}

TEST_CASE("order recovers a synthetic half order") {
  const auto dir = fresh_dir("sxlmd_cli_order");
  {
    std::ofstream out(dir / "half.csv");
    out << "value,seed,sup_r_err,sup_p_err,matvec_ax,matvec_dax,"
           "nonlinear_evals\n";
    for (double v : {1e-1, 1e-2, 1e-3, 1e-4}) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%.17g,-1,%.17g,%.17g,0,0,0\n", v,
                    std::sqrt(v), 2.0 * std::sqrt(v));
      out << buf;
    }
  }
  const CmdResult res = run_cli(dir, "order --input half.csv");
  CHECK(res.status == 0);
  CHECK(parse_value(res.out, "order_r") == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(parse_value(res.out, "order_p") == doctest::Approx(0.5).epsilon(1e-9));

  const CmdResult cut = run_cli(dir, "order --input half.csv --fit-threshold 1e-2");
  CHECK(cut.status == 0);
  CHECK(parse_value(cut.out, "order_r") == doctest::Approx(0.5).epsilon(1e-9));
  std::filesystem::remove_all(dir);
}

TEST_CASE("dumped configuration re-parses to the same dump") {
  const auto dir = fresh_dir("sxlmd_cli_dump");
  const CmdResult dumped = run_cli(
      dir, "run --dump-config --model b --eps 3e-5 --r0 0,0.5,1 --p0 1,0.5,-1");
  CHECK(dumped.status == 0);
  {
    std::ofstream out(dir / "cfg.txt", std::ios::binary);
    out << dumped.out;
  }
  const CmdResult again = run_cli(dir, "run --dump-config --config cfg.txt");
  CHECK(again.status == 0);
  CHECK(again.out == dumped.out);
  CHECK(dumped.out.find("eps = 3e-5") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("flags override configuration files") {
  const auto dir = fresh_dir("sxlmd_cli_prec");
  {
    std::ofstream out(dir / "cfg.txt");
    out << "model = model_a\neps = 1e-2\ndt = 1e-3\ntf = 0.01\n";
  }
  const CmdResult res =
      run_cli(dir, "run --config cfg.txt --eps 7e-3 --dump-config");
  CHECK(res.status == 0);
  CHECK(res.out.find("eps = 7e-3") != std::string::npos);
  CHECK(res.out.find("model = model_a") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unknown keys fail loudly with a nonzero status") {
  const auto dir = fresh_dir("sxlmd_cli_bad");
  CHECK(run_cli(dir, "run --no-such-flag 1").status != 0);

  {
    std::ofstream out(dir / "bad.txt");
    out << "epz = 1\n";
  }
  const CmdResult res = run_cli(dir, "run --config bad.txt");
  CHECK(res.status != 0);
  CHECK(res.err.find("epz") != std::string::npos);

  const CmdResult malformed = run_cli(dir, "run --eps notanumber");
  CHECK(malformed.status != 0);
  CHECK(malformed.err.find("eps") != std::string::npos);

  const CmdResult missing = run_cli(dir, "sweep --model a");
  CHECK(missing.status != 0);
  CHECK(missing.err.find("sweep_grid") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("langevin report prints machine-precision stationary residuals") {
  const auto dir = fresh_dir("sxlmd_cli_lan");
  const CmdResult res = run_cli(
      dir, "langevin --model a --gamma 0.1 --temp 1e-4 --t-max 2 --n-t 4");
  CHECK(res.status == 0);
  CHECK(parse_value(res.out, "sigma_lyapunov_residual") < 1e-12);
  CHECK(parse_value(res.out, "poisson_generator_residual") < 1e-8);
  CHECK(parse_value(res.out, "poisson_mean_residual") < 1e-8);
  CHECK(parse_value(res.out, "spectral_gap") ==
        doctest::Approx(0.025).epsilon(1e-9));
  CHECK(parse_value(res.out, "envelope_violations") == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("compare reports the work reduction") {
  const auto dir = fresh_dir("sxlmd_cli_cmp");
  const CmdResult res = run_cli(
      dir,
      "compare --model a --eps 1e-4 --temp 1e-4 --gamma 0.5 --dt 1e-3 "
      "--md-dt 1e-3 --md-scf-tol 1e-8 --tf 0.1 --ref-dt 5e-4 --ensemble 2 "
      "--ref-cache cache");
  CHECK(res.status == 0);
  CHECK(res.out.find("ax_reduction_pct=") != std::string::npos);
  const double md_ax = parse_value(res.out, "md_matvec_ax");
  const double sx_ax = parse_value(res.out, "sx_matvec_ax");
  const double pct = parse_value(res.out, "ax_reduction_pct");
  CHECK(pct == doctest::Approx(100.0 * (1.0 - sx_ax / md_ax)).epsilon(1e-9));
  std::filesystem::remove_all(dir);
}
