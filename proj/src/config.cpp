#include "kgm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <random>
#include <sstream>

#include "kgm/error.hpp"
#include "kgm/generators.hpp"

namespace kgm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::Config, "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "a number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

template <class T, std::size_t N>
void fill_array(const std::string& key, const std::vector<T>& vals, std::array<T, N>& dst) {
  if (vals.empty() || vals.size() > N) bad_value(key, std::to_string(vals.size()) + " entries", "1 to 3 entries");
  for (std::size_t i = 0; i < N; ++i) dst[i] = vals[std::min(i, vals.size() - 1)];
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <class T, std::size_t N>
std::string fmt_array(const std::array<T, N>& a, int count) {
  std::string s;
  for (int i = 0; i < count; ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) s += fmt(a[i]);
    else s += std::to_string(a[i]);
  }
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"grid.dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.grid.dim = static_cast<int>(to_int(k, v)); }},
      {"grid.extent", [](RunConfig& c, const std::string& k, const std::string& v) { fill_array(k, to_doubles(k, v), c.grid.extent); }},
      {"grid.n",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         std::vector<int> ns;
         for (const auto& s : split_list(v)) ns.push_back(static_cast<int>(to_int(k, s)));
         fill_array(k, ns, c.grid.n);
       }},
      {"problem.m", [](RunConfig& c, const std::string& k, const std::string& v) { c.m = to_double(k, v); }},
      {"q.kind", [](RunConfig& c, const std::string&, const std::string& v) { c.q.kind = v; }},
      {"q.value", [](RunConfig& c, const std::string& k, const std::string& v) { c.q.value = to_double(k, v); }},
      {"q.center", [](RunConfig& c, const std::string& k, const std::string& v) { fill_array(k, to_doubles(k, v), c.q.center); }},
      {"q.width", [](RunConfig& c, const std::string& k, const std::string& v) { c.q.width = to_double(k, v); }},
      {"q.axis", [](RunConfig& c, const std::string& k, const std::string& v) { c.q.axis = static_cast<int>(to_int(k, v)); }},
      {"q.upper", [](RunConfig& c, const std::string& k, const std::string& v) { c.q.upper = to_bool(k, v); }},
      {"q.file", [](RunConfig& c, const std::string&, const std::string& v) { c.q.file = v; }},
      {"q.scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.q.scale = to_double(k, v); }},
      {"alpha.kind", [](RunConfig& c, const std::string&, const std::string& v) { c.alpha.kind = v; }},
      {"alpha.value", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha.value = to_double(k, v); }},
      {"alpha.face", [](RunConfig& c, const std::string&, const std::string& v) { c.alpha.face = v; }},
      {"alpha.axis", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha.axis = static_cast<int>(to_int(k, v)); }},
      {"alpha.file", [](RunConfig& c, const std::string&, const std::string& v) { c.alpha.file = v; }},
      {"alpha.scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha.scale = to_double(k, v); }},
      {"solver.tol_lin", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.tol_lin = to_double(k, v); }},
      {"solver.max_iter_factor", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.max_iter_factor = to_double(k, v); }},
      {"solver.tol_grad", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.tol_grad = to_double(k, v); }},
      {"solver.max_iter", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.max_iter = static_cast<int>(to_int(k, v)); }},
      {"solver.tol_lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.solver.tol_lambda = to_double(k, v); }},
      {"run.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"run.workers", [](RunConfig& c, const std::string& k, const std::string& v) { c.workers = static_cast<int>(to_int(k, v)); }},
      {"run.profile", [](RunConfig& c, const std::string&, const std::string& v) { c.profile = v; }},
      {"invariants.n_probe", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_probe = static_cast<int>(to_int(k, v)); }},
      {"sweep.t_values", [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep_t = to_doubles(k, v); }},
      {"sweep.count", [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep_count = static_cast<int>(to_int(k, v)); }},
      {"sweep.t_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep_t_min = to_double(k, v); }},
      {"sweep.t_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.sweep_t_max = to_double(k, v); }},
      {"nonexistence.seeds", [](RunConfig& c, const std::string& k, const std::string& v) { c.nonexistence_seeds = static_cast<int>(to_int(k, v)); }},
      {"nonexistence.decay_ratio", [](RunConfig& c, const std::string& k, const std::string& v) { c.decay_ratio = to_double(k, v); }},
      {"solve.seeds", [](RunConfig& c, const std::string& k, const std::string& v) { c.solve_seeds = static_cast<int>(to_int(k, v)); }},
      {"multistart.k", [](RunConfig& c, const std::string& k, const std::string& v) { c.multistart_k = static_cast<int>(to_int(k, v)); }},
      {"multistart.sep_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.sep_tol = to_double(k, v); }},
      {"constants.restarts", [](RunConfig& c, const std::string& k, const std::string& v) { c.constants_restarts = static_cast<int>(to_int(k, v)); }},
      {"residual.u_file", [](RunConfig& c, const std::string&, const std::string& v) { c.residual_u_file = v; }},
      {"residual.phi_file", [](RunConfig& c, const std::string&, const std::string& v) { c.residual_phi_file = v; }},
      {"residual.tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.residual_tol = to_double(k, v); }},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorCode::Config, "unknown config key '" + key + "'");
  it->second(*this, key, trim(value));
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::Config, msg); };
  if (grid.dim != 2 && grid.dim != 3) fail("grid.dim must be 2 or 3");
  for (int a = 0; a < grid.dim; ++a) {
    if (!(grid.extent[a] > 0.0)) fail("grid.extent entries must be positive");
    if (grid.n[a] < 3) fail("grid.n entries must be at least 3");
  }
  if (!(solver.tol_lin > 0.0) || !(solver.tol_grad > 0.0) || !(solver.tol_lambda > 0.0) ||
      !(solver.max_iter_factor > 0.0) || !(residual_tol > 0.0) || !(sep_tol > 0.0) || !(decay_ratio > 0.0))
    fail("all tolerances must be positive");
  if (solver.max_iter < 1) fail("solver.max_iter must be at least 1");
  if (!profile.empty() && profile != "fast" && profile != "fidelity")
    fail("run.profile must be fast or fidelity, got '" + profile + "'");
  if (workers < 1) fail("run.workers must be at least 1");
  if (n_probe < 1) fail("invariants.n_probe must be at least 1");
  if (nonexistence_seeds < 1 || solve_seeds < 1) fail("seed counts must be at least 1");
  if (multistart_k < 0) fail("multistart.k must be nonnegative");
  if (constants_restarts < 1) fail("constants.restarts must be at least 1");
  if (sweep_t.empty() && (sweep_count < 1 || !(sweep_t_min > 0.0) || !(sweep_t_max >= sweep_t_min)))
    fail("sweep needs count >= 1 and 0 < t_min <= t_max, or an explicit t_values list");
  static const char* q_kinds[] = {"constant", "gaussian", "half", "file"};
  static const char* a_kinds[] = {"constant", "face", "dipole", "random", "zero", "file"};
  if (std::find(std::begin(q_kinds), std::end(q_kinds), q.kind) == std::end(q_kinds))
    fail("q.kind must be constant, gaussian, half or file, got '" + q.kind + "'");
  if (std::find(std::begin(a_kinds), std::end(a_kinds), alpha.kind) == std::end(a_kinds))
    fail("alpha.kind must be constant, face, dipole, random, zero or file, got '" + alpha.kind + "'");
  if (q.kind == "file" && q.file.empty()) fail("q.kind = file needs q.file");
  if (alpha.kind == "file" && alpha.file.empty()) fail("alpha.kind = file needs alpha.file");
}

GridSpec RunConfig::effective_grid() const {
  GridSpec g = grid;
  if (profile == "fast") g.n = {9, 9, 9};
  if (profile == "fidelity") g.n = {17, 17, 17};
  return g;
}

std::vector<double> RunConfig::sweep_values() const {
  if (!sweep_t.empty()) return sweep_t;
  std::vector<double> t(sweep_count);
  for (int i = 0; i < sweep_count; ++i) {
    const double s = sweep_count == 1 ? 0.0 : static_cast<double>(i) / (sweep_count - 1);
    t[i] = sweep_t_min * std::pow(sweep_t_max / sweep_t_min, s);
  }
  return t;
}

std::vector<std::pair<std::string, std::string>> RunConfig::echo() const {
  const GridSpec g = effective_grid();
  std::vector<std::pair<std::string, std::string>> e = {
      {"source", source},
      {"grid.dim", std::to_string(g.dim)},
      {"grid.extent", fmt_array(g.extent, g.dim)},
      {"grid.n", fmt_array(g.n, g.dim)},
      {"problem.m", fmt(m)},
      {"q.kind", q.kind},
  };
  if (q.kind == "file") e.push_back({"q.file", q.file});
  else e.push_back({"q.value", fmt(q.value)});
  if (q.kind == "gaussian") {
    e.push_back({"q.center", fmt_array(q.center, g.dim)});
    e.push_back({"q.width", fmt(q.width)});
  }
  if (q.kind == "half") {
    e.push_back({"q.axis", std::to_string(q.axis)});
    e.push_back({"q.upper", q.upper ? "true" : "false"});
  }
  e.push_back({"q.scale", fmt(q.scale)});
  e.push_back({"alpha.kind", alpha.kind});
  if (alpha.kind == "file") e.push_back({"alpha.file", alpha.file});
  else e.push_back({"alpha.value", fmt(alpha.value)});
  if (alpha.kind == "face") e.push_back({"alpha.face", alpha.face});
  if (alpha.kind == "dipole") e.push_back({"alpha.axis", std::to_string(alpha.axis)});
  e.push_back({"alpha.scale", fmt(alpha.scale)});
  e.push_back({"solver.tol_lin", fmt(solver.tol_lin)});
  e.push_back({"solver.tol_grad", fmt(solver.tol_grad)});
  e.push_back({"solver.max_iter", std::to_string(solver.max_iter)});
  e.push_back({"solver.tol_lambda", fmt(solver.tol_lambda)});
  e.push_back({"run.seed", std::to_string(seed)});
  e.push_back({"run.workers", std::to_string(workers)});
  e.push_back({"run.profile", profile.empty() ? "none" : profile});
  return e;
}

RunConfig parse_config(std::istream& is, const std::string& source) {
  RunConfig c;
  c.source = source;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Config, source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    try {
      c.set(key, line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is, "<text>");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file '" + path + "'");
  return parse_config(in, path);
}

GridPtr build_grid(const RunConfig& c) {
  const GridSpec g = c.effective_grid();
  return Grid::build(g.dim, g.extent, g.n);
}

ScalarField build_q(const RunConfig& c, const GridPtr& grid) {
  ScalarField q;
  if (c.q.kind == "constant") q = gen::constant(grid, c.q.value);
  else if (c.q.kind == "gaussian") q = gen::gaussian_bump(grid, c.q.center, c.q.width, c.q.value, Space::Neumann);
  else if (c.q.kind == "half") q = gen::half_indicator(grid, c.q.axis, c.q.upper, c.q.value, Space::Neumann);
  else if (c.q.kind == "file") q = load_scalar_field(c.q.file, grid);
  else throw Error(ErrorCode::Config, "unknown q.kind '" + c.q.kind + "'");
  q.space = Space::Neumann;
  return c.q.scale * q;
}

BoundaryField build_alpha(const RunConfig& c, const GridPtr& grid) {
  BoundaryField a;
  if (c.alpha.kind == "constant") a = gen::boundary_constant(grid, c.alpha.value);
  else if (c.alpha.kind == "zero") a = gen::boundary_constant(grid, 0.0);
  else if (c.alpha.kind == "face") a = gen::face_indicator(grid, gen::parse_face(c.alpha.face, grid->dim()), c.alpha.value);
  else if (c.alpha.kind == "dipole") a = gen::face_dipole(grid, c.alpha.axis, c.alpha.value);
  else if (c.alpha.kind == "random") {
    std::mt19937_64 rng(c.seed ^ 0xa1fa5eedULL);
    a = gen::random_boundary(grid, rng);
  } else if (c.alpha.kind == "file") a = load_boundary_field(c.alpha.file, grid);
  else throw Error(ErrorCode::Config, "unknown alpha.kind '" + c.alpha.kind + "'");
  return c.alpha.scale * a;
}

ProblemTolerances build_tolerances(const RunConfig& c) {
  ProblemTolerances t;
  t.linear.tol = c.solver.tol_lin;
  t.linear.max_iter_factor = c.solver.max_iter_factor;
  t.tol_lambda = c.solver.tol_lambda;
  return t;
}

ReducedProblem build_problem(const RunConfig& c, const GridPtr& grid, double q_scale) {
  if (q_scale == 0.0)
    throw Error(ErrorCode::InvalidArgument, "scale factor t = 0 makes q vanish identically; q must be nonzero");
  return ReducedProblem::assemble(c.m, q_scale * build_q(c, grid), build_alpha(c, grid), build_tolerances(c));
}

}  // namespace kgm
