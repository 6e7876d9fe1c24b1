#pragma once

#include <map>
#include <string>
#include <vector>

#include "sxlmd/harness.hpp"

namespace sxlmd {

// ============================================================
// CSV emission / ingestion
// ============================================================

// Header `t,r1..rD,p1..pD,x1..xM,y1..yM,energy,latent_ke`, one row per
// sample, 17 significant digits, written atomically (temp file + rename).
// Methods that carry no latent state emit zero columns for it.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

// Sweep CSV: one detail row per (value, seed) plus one summary row per value
// with seed = -1 carrying the ensemble means.
struct SweepCsvRow {
  double value = 0.0;
  long seed = 0;  // -1 marks a summary row
  double sup_r_err = 0.0;
  double sup_p_err = 0.0;
  long long matvec_ax = 0;
  long long matvec_dax = 0;
  long long nonlinear_evals = 0;
};

void write_sweep_csv(const std::string& path, const SweepResult& sweep);
std::vector<SweepCsvRow> read_sweep_csv(const std::string& path);

// ============================================================
// Configuration
// ============================================================

// Flat key=value configuration with a closed schema; unknown keys and
// malformed values are rejected at set() time.  Values are kept as strings;
// typed accessors parse on demand.
class RunConfig {
 public:
  // Throws std::invalid_argument naming the key on any violation.
  void set(const std::string& key, const std::string& value);

  bool is_set(const std::string& key) const;
  std::string raw(const std::string& key) const;  // throws if unset

  double get_real(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::vector<double> get_reals(const std::string& key) const;  // empty if unset

  // `key = value` lines in schema order; re-parses to an identical config.
  std::string dump() const;

  // Parses `key = value` lines; '#' starts a comment; blank lines ignored.
  static RunConfig from_file(const std::string& path);
  void merge(const RunConfig& overrides);

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace sxlmd
