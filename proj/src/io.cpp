#include "sxlmd/io.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sxlmd {

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(what + ": not a real number: '" + s + "'");
  }
  if (pos != t.size())
    throw std::invalid_argument(what + ": not a real number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(what + ": not an integer: '" + s + "'");
  }
  if (pos != t.size())
    throw std::invalid_argument(what + ": not an integer: '" + s + "'");
  return v;
}

// Writes through a temp file in the same directory so readers never observe
// a partially written file.
void atomic_write(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path())
    std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  if (traj.states.empty())
    throw std::invalid_argument("write_trajectory_csv: empty trajectory");
  const long d_r = traj.states.front().r.size();
  const long d_x = traj.states.front().x.size();
  const long d_y = traj.states.front().y.size();

  std::string out = "t";
  for (long k = 1; k <= d_r; ++k) out += ",r" + std::to_string(k);
  for (long k = 1; k <= d_r; ++k) out += ",p" + std::to_string(k);
  for (long k = 1; k <= d_x; ++k) out += ",x" + std::to_string(k);
  for (long k = 1; k <= d_y; ++k) out += ",y" + std::to_string(k);
  out += ",energy,latent_ke\n";

  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const ExtendedState& s = traj.states[i];
    out += fmt_real(traj.times[i]);
    for (long k = 0; k < d_r; ++k) out += "," + fmt_real(s.r[k]);
    for (long k = 0; k < d_r; ++k) out += "," + fmt_real(s.p[k]);
    for (long k = 0; k < d_x; ++k) out += "," + fmt_real(s.x[k]);
    for (long k = 0; k < d_y; ++k) out += "," + fmt_real(s.y[k]);
    out += "," + fmt_real(traj.energy[i]);
    out += "," + fmt_real(traj.latent_ke[i]);
    out += "\n";
  }
  atomic_write(path, out);
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty trajectory file: " + path);

  const std::vector<std::string> head = split(trim(line), ',');
  if (head.size() < 4 || head.front() != "t" ||
      head[head.size() - 2] != "energy" || head.back() != "latent_ke")
    throw std::runtime_error("malformed trajectory header: " + path);
  long d_r = 0, d_x = 0, d_y = 0;
  for (const std::string& h : head) {
    if (h.size() >= 2 && std::isdigit(static_cast<unsigned char>(h[1]))) {
      if (h[0] == 'r') ++d_r;
      if (h[0] == 'x') ++d_x;
      if (h[0] == 'y') ++d_y;
    }
  }
  const std::size_t n_cols = 1 + 2 * d_r + d_x + d_y + 2;
  if (head.size() != n_cols)
    throw std::runtime_error("malformed trajectory header: " + path);

  Trajectory traj;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != n_cols)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": wrong column count");
    std::size_t c = 0;
    auto next = [&]() { return parse_real(cells[c++], path); };
    ExtendedState s;
    s.t = next();
    s.r.resize(d_r);
    for (long k = 0; k < d_r; ++k) s.r[k] = next();
    s.p.resize(d_r);
    for (long k = 0; k < d_r; ++k) s.p[k] = next();
    s.x.resize(d_x);
    for (long k = 0; k < d_x; ++k) s.x[k] = next();
    s.y.resize(d_y);
    for (long k = 0; k < d_y; ++k) s.y[k] = next();
    traj.times.push_back(s.t);
    traj.energy.push_back(next());
    traj.latent_ke.push_back(next());
    traj.states.push_back(std::move(s));
  }
  if (traj.states.empty())
    throw std::runtime_error("trajectory file has no rows: " + path);
  return traj;
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  if (sweep.grid.size() != sweep.reports.size())
    throw std::invalid_argument("write_sweep_csv: grid/report size mismatch");
  std::string out =
      "value,seed,sup_r_err,sup_p_err,matvec_ax,matvec_dax,nonlinear_evals\n";
  auto counters_cols = [](const CostCounters& c) {
    return "," + std::to_string(c.matvec_ax) + "," +
           std::to_string(c.matvec_dax) + "," +
           std::to_string(c.nonlinear_evals);
  };
  for (std::size_t i = 0; i < sweep.grid.size(); ++i) {
    const ErrorReport& rep = sweep.reports[i];
    for (int s = 0; s < rep.ensemble_size; ++s) {
      out += fmt_real(sweep.grid[i]) + "," + std::to_string(s);
      out += "," + fmt_real(rep.per_seed_sup_r[s]);
      out += "," + fmt_real(rep.per_seed_sup_p[s]);
      out += counters_cols(rep.counters) + "\n";
    }
    out += fmt_real(sweep.grid[i]) + ",-1";
    out += "," + fmt_real(rep.sup_r_error);
    out += "," + fmt_real(rep.sup_p_error);
    out += counters_cols(rep.counters) + "\n";
  }
  atomic_write(path, out);
}

std::vector<SweepCsvRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      trim(line) !=
          "value,seed,sup_r_err,sup_p_err,matvec_ax,matvec_dax,nonlinear_evals")
    throw std::runtime_error("malformed sweep header: " + path);

  std::vector<SweepCsvRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != 7)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": wrong column count");
    SweepCsvRow row;
    row.value = parse_real(cells[0], path);
    row.seed = static_cast<long>(parse_int(cells[1], path));
    row.sup_r_err = parse_real(cells[2], path);
    row.sup_p_err = parse_real(cells[3], path);
    row.matvec_ax = parse_int(cells[4], path);
    row.matvec_dax = parse_int(cells[5], path);
    row.nonlinear_evals = parse_int(cells[6], path);
    rows.push_back(row);
  }
  return rows;
}

// ============================================================
// RunConfig
// ============================================================

namespace {

enum class KeyKind { real, real_list, integer, word, text };

struct KeySpec {
  const char* name;
  KeyKind kind;
  // Allowed words for KeyKind::word; empty means any non-empty token.
  std::vector<std::string> words;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"model", KeyKind::word, {"model_a", "model_b", "model_c", "a", "b", "c"}},
      {"b_variant", KeyKind::word, {"r1", "r2"}},
      {"method", KeyKind::word, {"exact", "xlbomd", "sxlmd", "averaged"}},
      {"eps", KeyKind::real, {}},
      {"temp", KeyKind::real, {}},
      {"gamma", KeyKind::real, {}},
      {"dt", KeyKind::real, {}},
      {"tf", KeyKind::real, {}},
      {"scf_tol", KeyKind::real, {}},
      {"max_scf_iter", KeyKind::integer, {}},
      {"solver", KeyKind::word, {"cg", "anderson"}},
      {"anderson_alpha", KeyKind::real, {}},
      {"anderson_depth", KeyKind::integer, {}},
      {"seed", KeyKind::integer, {}},
      {"x_init", KeyKind::word, {"scf", "offset", "value"}},
      {"x_offset", KeyKind::real_list, {}},
      {"x_value", KeyKind::real_list, {}},
      {"y_init", KeyKind::word, {"zero", "consistent"}},
      {"r0", KeyKind::real_list, {}},
      {"p0", KeyKind::real_list, {}},
      {"out_stride", KeyKind::integer, {}},
      {"output", KeyKind::text, {}},
      {"ensemble", KeyKind::integer, {}},
      {"sweep_param", KeyKind::word, {"eps", "temp", "gamma", "eps_coupled"}},
      {"sweep_grid", KeyKind::real_list, {}},
      {"fit_threshold", KeyKind::real, {}},
      {"ref_dt", KeyKind::real, {}},
      {"ref_scf_tol", KeyKind::real, {}},
      {"ref_cache", KeyKind::text, {}},
      {"threads", KeyKind::integer, {}},
      {"input", KeyKind::text, {}},
      {"md_dt", KeyKind::real, {}},
      {"md_scf_tol", KeyKind::real, {}},
      {"t_max", KeyKind::real, {}},
      {"n_t", KeyKind::integer, {}},
  };
  return specs;
}

const KeySpec* find_key(const std::string& key) {
  for (const KeySpec& s : key_specs())
    if (key == s.name) return &s;
  return nullptr;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw std::invalid_argument("unknown configuration key: " + key);
  const std::string v = trim(value);
  if (v.empty()) throw std::invalid_argument(key + ": empty value");
  switch (spec->kind) {
    case KeyKind::real:
      parse_real(v, key);
      break;
    case KeyKind::real_list:
      for (const std::string& item : split(v, ',')) parse_real(item, key);
      break;
    case KeyKind::integer:
      parse_int(v, key);
      break;
    case KeyKind::word: {
      bool ok = false;
      for (const std::string& w : spec->words) ok = ok || w == v;
      if (!ok) {
        std::string allowed;
        for (const std::string& w : spec->words)
          allowed += (allowed.empty() ? "" : "|") + w;
        throw std::invalid_argument(key + ": expected one of " + allowed +
                                    ", got '" + v + "'");
      }
      break;
    }
    case KeyKind::text:
      break;
  }
  values_[key] = v;
}

bool RunConfig::is_set(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string RunConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("configuration key not set: " + key);
  return it->second;
}

double RunConfig::get_real(const std::string& key, double fallback) const {
  return is_set(key) ? parse_real(raw(key), key) : fallback;
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
  return is_set(key) ? parse_int(raw(key), key) : fallback;
}

std::string RunConfig::get_string(const std::string& key,
                                  const std::string& fallback) const {
  return is_set(key) ? raw(key) : fallback;
}

std::vector<double> RunConfig::get_reals(const std::string& key) const {
  std::vector<double> out;
  if (!is_set(key)) return out;
  for (const std::string& item : split(raw(key), ','))
    out.push_back(parse_real(item, key));
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const KeySpec& spec : key_specs()) {
    auto it = values_.find(spec.name);
    if (it != values_.end())
      out += std::string(spec.name) + " = " + it->second + "\n";
  }
  return out;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::merge(const RunConfig& overrides) {
  for (const auto& [key, value] : overrides.values_) values_[key] = value;
}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const KeySpec& spec : key_specs()) out.emplace_back(spec.name);
    return out;
  }();
  return keys;
}

}  // namespace sxlmd
