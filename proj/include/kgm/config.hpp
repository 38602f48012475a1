#pragma once

// Run configuration: flat `key = value` text with dotted section names.
// Lines starting with '#' are comments; unknown keys are rejected.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "kgm/grid.hpp"
#include "kgm/reduced.hpp"

namespace kgm {

struct GridSpec {
  int dim = 3;
  std::array<double, 3> extent{1.0, 1.0, 1.0};
  std::array<int, 3> n{9, 9, 9};
};

struct CouplingSpec {
  std::string kind = "constant";  // constant | gaussian | half | file
  double value = 1.0;
  std::array<double, 3> center{0.5, 0.5, 0.5};
  double width = 0.25;
  int axis = 0;
  bool upper = false;
  std::string file;
  double scale = 1.0;  // t_q
};

struct FluxSpec {
  std::string kind = "constant";  // constant | face | dipole | random | zero | file
  double value = 1.0;
  std::string face = "x0+";
  int axis = 0;
  std::string file;
  double scale = 1.0;  // t_α
};

struct SolverSpec {
  double tol_lin = 1e-10;
  double max_iter_factor = 10.0;
  double tol_grad = 1e-6;
  int max_iter = 5000;
  double tol_lambda = 1e-12;
};

struct RunConfig {
  GridSpec grid;
  double m = 1.0;
  CouplingSpec q;
  FluxSpec alpha;
  SolverSpec solver;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string profile;  // "", fast, fidelity
  std::string source;   // where the config came from

  int n_probe = 50;
  std::vector<double> sweep_t;
  int sweep_count = 8;
  double sweep_t_min = 0.25;
  double sweep_t_max = 32.0;
  int nonexistence_seeds = 5;
  double decay_ratio = 1e-4;
  int solve_seeds = 5;
  int multistart_k = 0;
  double sep_tol = 1e-3;
  int constants_restarts = 20;
  std::string residual_u_file;
  std::string residual_phi_file;
  double residual_tol = 1e-7;

  // Sets one key from its textual value; throws Error(Config) on unknown
  // keys and malformed values.
  void set(const std::string& key, const std::string& value);
  // Checks cross-field constraints (positive tolerances, profile name, ...).
  void validate() const;
  // key/value pairs in a fixed order, for report headers.
  std::vector<std::pair<std::string, std::string>> echo() const;
  // Applies the profile, if any, to the grid resolution.
  GridSpec effective_grid() const;
  // The t values of the δ-sweep (explicit list or a geometric grid).
  std::vector<double> sweep_values() const;
};

RunConfig parse_config(std::istream& is, const std::string& source = "<stream>");
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Objects built from a configuration.
GridPtr build_grid(const RunConfig& c);
ScalarField build_q(const RunConfig& c, const GridPtr& grid);
BoundaryField build_alpha(const RunConfig& c, const GridPtr& grid);
ProblemTolerances build_tolerances(const RunConfig& c);
ReducedProblem build_problem(const RunConfig& c, const GridPtr& grid, double q_scale = 1.0);

}  // namespace kgm
