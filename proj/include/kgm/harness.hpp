#pragma once

// Experiment runner: invariant suite, δ-sweep, nonexistence experiment,
// single solves, constants and residual checks. Every experiment returns a
// RunReport whose checks each carry a verdict, the measured value and the
// threshold it was compared against.

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgm/config.hpp"
#include "kgm/optimize.hpp"
#include "kgm/reduced.hpp"

namespace kgm {

struct Check {
  std::string name;
  bool passed = false;
  bool asserted = true;  // informational checks never fail a report
  double measured = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=", "==", ...
  std::string note;
};

struct RunReport {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::optional<ConstantsEstimate> constants;
  std::vector<std::pair<std::string, std::string>> values;  // named scalar outputs
  std::deque<Check> checks;
  std::vector<std::string> artifacts;
  std::vector<std::string> notes;
  double runtime_s = 0.0;

  bool passed() const;
  const Check* find(const std::string& name) const;
  std::string text() const;

  void value(const std::string& key, double v);
  void value(const std::string& key, const std::string& v);
  // Adds a check comparing `measured` against `threshold`.
  Check& check_le(const std::string& name, double measured, double threshold, const std::string& note = "");
  Check& check_ge(const std::string& name, double measured, double threshold, const std::string& note = "");
  Check& check_true(const std::string& name, bool ok, const std::string& note = "");
  // A check that was not evaluated; it passes and records the reason.
  Check& skip(const std::string& name, const std::string& reason);
};

// Runs f(0..count-1) on up to `workers` threads; results must be written to
// per-index slots by the caller.
void parallel_for(int count, int workers, const std::function<void(int)>& f);

// α samples used for κ̂: the problem's α, every face indicator, the constant,
// one dipole per axis and three smooth random fields.
std::vector<BoundaryField> kappa_samples(const GridPtr& grid, const BoundaryField& alpha, std::uint64_t seed);
ConstantsEstimate constants_for(const RunConfig& c, const GridPtr& grid, const BoundaryField& alpha);

RunReport run_invariants(const RunConfig& c);
RunReport sweep_delta(const RunConfig& c, const std::string& out_dir = "");
RunReport run_nonexistence(const RunConfig& c);
RunReport run_solve(const RunConfig& c, const std::string& out_dir = "");
RunReport run_constants(const RunConfig& c);
RunReport run_residual(const RunConfig& c);

// Dispatches on a CLI subcommand name and writes report.txt (and any CSVs or
// field dumps) to out_dir when it is non-empty.
RunReport run_command(const RunConfig& c, const std::string& command, const std::string& out_dir);

// CSV text of a δ-sweep, as written by sweep_delta.
struct SweepRow {
  double t = 0.0;
  double product = 0.0;
  double delta_hat = 0.0;
  bool below_delta = false;
  bool converged = false;
  double J = 0.0;
  double grad_u_l2 = 0.0;
  double grad_norm = 0.0;
  double qu_l3 = 0.0;
  int iterations = 0;
  std::string status;
};

std::vector<SweepRow> sweep_rows(const RunConfig& c);
std::string sweep_csv(const RunConfig& c, const std::vector<SweepRow>& rows);

// The inequality from the nonexistence argument, evaluated at one iterate:
// ‖∇u‖² + ∫(m² - q²χ²)u² + ∫(qu)²φ² + 2‖∇φ‖² - [1 - κ²σ²‖q‖₆²‖α‖²]‖∇u‖².
double nonexistence_slack(const ReducedProblem& p, const ConstantsEstimate& k, const ScalarField& u,
                          const ScalarField& phi);

}  // namespace kgm
