#pragma once

// Critical points of the reduced energy: the nonnegative minimizer by Sobolev
// gradient descent, and further critical-point candidates by deflation.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kgm/reduced.hpp"

namespace kgm {

enum class SolveStatus { Converged, IterationCap, LineSearchFailure, LeftLambda, Diverged, Decayed };

const char* to_string(SolveStatus s);

struct IterateInfo {
  int iteration = 0;
  const ScalarField* u = nullptr;
  const ScalarField* phi = nullptr;
  double J = 0.0;
  double grad_norm = 0.0;
  double grad_u = 0.0;  // ‖∇u‖₂
  double qu_l3 = 0.0;
};

struct MinimizeOptions {
  double tol_grad = 1e-6;
  int max_iter = 5000;
  double armijo_c = 1e-4;
  double initial_step = 1.0;
  int max_backtracks = 50;
  bool nonnegative = false;
  // Stop with status Decayed once ‖∇u‖₂ ≤ decay_ratio ‖∇u_init‖₂ (0 disables).
  double decay_ratio = 0.0;
  double divergence_limit = 1e12;  // on ‖∇u‖₂
  std::function<void(const IterateInfo&)> observer;
};

struct SolveResult {
  ScalarField u;
  ScalarField phi;
  double J_value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  SolveStatus status = SolveStatus::IterationCap;
  std::string message;
  std::vector<double> qu_l3_history;
  std::vector<double> J_history;  // J after every accepted step, starting with J(u_init)
  std::vector<double> grad_u_history;
  PhiDecomposition invariants;
  bool invariants_evaluated = false;
  int noise_steps = 0;  // steps accepted on gradient decrease below the resolution of J
  double j_resolution = 0.0;  // largest J increase such a step may carry
};

SolveResult minimize(const ReducedProblem& p, const ScalarField& u_init, const MinimizeOptions& opts = {});

ScalarField symmetrize(const ScalarField& u);

// Scaled first Dirichlet eigenfunction plus Gaussian nodal noise.
ScalarField default_seed(const GridPtr& grid, std::uint64_t seed, double scale = 1.0, double noise = 0.1);

struct DeflationOptions {
  int k = 4;
  double sep_tol = 1e-3;
  std::uint64_t seed = 1;
  double seed_scale = 1.0;
  double seed_noise = 0.05;
  int newton_max_iter = 200;
  int attempts_per_point = 6;
  MinimizeOptions minimize{};
};

struct MultistartResult {
  // Verified critical-point candidates sorted by J.
  std::vector<SolveResult> points;
  int requested = 0;
  int attempts = 0;
  bool j_strictly_increasing = false;
  std::string warning;
};

// Undeflated damped Newton iteration on J' with an exact Hessian action;
// deflation operators may be supplied to repel known solutions ±u_j.
SolveResult newton_solve(const ReducedProblem& p, const ScalarField& u_init, const MinimizeOptions& opts,
                         const std::vector<ScalarField>& deflate = {}, int max_iter = 200);

MultistartResult multistart_deflate(const ReducedProblem& p, const DeflationOptions& opts = {});

double h10_distance(const ScalarField& a, const ScalarField& b);

}  // namespace kgm
