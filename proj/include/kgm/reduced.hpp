#pragma once

// The reduced problem: the admissible set Λ_q = {u : q u ≢ 0}, the map
// Φ(u) = L_{qu}(ρ_u) with ρ_u = A/|Ω| - (qu)²χ, its split Φ = η_u + ξ_u, the
// reduced energy J(u) = F(u, Φ(u)), its H¹₀ gradient, the embedding and
// regularity constants behind the smallness threshold, and the residual of
// the full coupled system.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "kgm/elliptic.hpp"
#include "kgm/grid.hpp"

namespace kgm {

struct ProblemTolerances {
  LinearSolverOptions linear{};
  double tol_lambda = 1e-12;  // Λ_q membership threshold on ‖qu‖₃
};

class ReducedProblem {
 public:
  static ReducedProblem assemble(double m, ScalarField q, BoundaryField alpha,
                                 ProblemTolerances tol = {});

  const GridPtr& grid() const { return q_.grid; }
  double m() const { return m_; }
  const ScalarField& q() const { return q_; }
  const BoundaryField& alpha() const { return alpha_; }
  const ChiSolution& chi() const { return chi_; }
  double flux() const { return chi_.flux; }
  const ProblemTolerances& tolerances() const { return tol_; }

  double q_l6() const { return q_l6_; }
  double alpha_half_norm() const { return alpha_half_; }
  // ‖q‖₆ ‖α‖_{1/2}, compared against the smallness threshold δ.
  double smallness() const { return q_l6_ * alpha_half_; }
  // A = 0: the regime where no nontrivial solution is expected for small data.
  bool nonexistence_regime() const { return nonexistence_; }

 private:
  ReducedProblem() = default;

  double m_ = 0.0;
  ScalarField q_;
  BoundaryField alpha_;
  ChiSolution chi_;
  ProblemTolerances tol_;
  double q_l6_ = 0.0;
  double alpha_half_ = 0.0;
  bool nonexistence_ = false;
};

struct LambdaDiagnostic {
  double qu_l3 = 0.0;
  bool member = false;
};

LambdaDiagnostic lambda_diagnostic(const ReducedProblem& p, const ScalarField& u);

// Throws LambdaViolation when u ∉ Λ_q.
void require_admissible(const ReducedProblem& p, const ScalarField& u);

// Thresholds for the pointwise invariants of the decomposition.
struct PhiThresholds {
  double sign_tol = 1e-10;       // A η ≥ -sign_tol
  double xi_rel = 1e-8;          // ‖ξ‖∞ ≤ ‖χ‖∞ (1 + xi_rel)
  double flux_rel = 1e-10;       // |∫(qu)²η - A| ≤ flux_rel |A|
};

struct PhiDecomposition {
  ScalarField eta;
  ScalarField xi;
  ScalarField phi;
  double eta_mean = 0.0;
  double xi_mean = 0.0;
  double eta_residual = 0.0;  // max strong-form residual of the η equation
  double xi_residual = 0.0;
  double min_a_eta = 0.0;     // min over nodes of A η
  double xi_inf = 0.0;
  double chi_inf = 0.0;
  double flux_integral = 0.0;        // ∫(qu)²η
  double flux_relative_error = 0.0;  // |∫(qu)²η - A| / |A|, absolute when A = 0
  bool sign_ok = false;
  bool xi_bound_ok = false;
  bool flux_ok = false;

  bool all_ok() const { return sign_ok && xi_bound_ok && flux_ok; }
};

PhiDecomposition phi_of(const ReducedProblem& p, const ScalarField& u,
                        const PhiThresholds& thresholds = {});

// Φ(u) by a single screened solve with the full density ρ_u.
ScalarField solve_phi(const ReducedProblem& p, const ScalarField& u);

// Embedding and regularity constants; all are discrete estimates. σ̂ and γ̂
// come from ascent on the respective quotients (lower estimates of the
// discrete suprema), κ̂ is the largest ‖χ_α‖∞ / ‖α‖_{1/2} over the samples
// (a lower estimate), so δ̂ = 1/(κ̂σ̂) is an upper estimate of δ.
struct ConstantsEstimate {
  double sigma = 0.0;
  double gamma = 0.0;
  double kappa = 0.0;
  double delta = 0.0;
  std::vector<double> kappa_samples;  // ‖χ_α‖∞ / ‖α‖_{1/2} per nonzero sample
  const char* sigma_tag = "discrete ascent estimate (lower)";
  const char* gamma_tag = "discrete ascent estimate (lower)";
  const char* kappa_tag = "empirical sample maximum (lower)";
  const char* delta_tag = "empirical (upper)";
};

struct ConstantsOptions {
  int restarts = 20;
  int max_iter = 400;
  double tol = 1e-12;
  std::uint64_t seed = 1;
  LinearSolverOptions linear{};
};

ConstantsEstimate estimate_constants(const GridPtr& grid, const std::vector<BoundaryField>& alpha_samples,
                                     const ConstantsOptions& opts = {});

// Best σ in ‖u‖₃ ≤ σ ‖∇u‖₂ found from one starting field (returns the quotient
// at the final iterate).
double sobolev_ascent(ScalarField u, int max_iter, double tol, const LinearSolverOptions& linear);
// Best γ in ‖f - f̄‖₃ ≤ γ ‖∇f‖₂ found from one starting field.
double poincare_ascent(ScalarField f, int max_iter, double tol, const LinearSolverOptions& linear);

struct JReport {
  double value = 0.0;             // F(u, Φ(u))
  double value_direct = 0.0;      // ‖∇u‖² + ∫(m² - q²χ²)u² - ∫(qu)²χφ + A φ̄
  double value_decomposed = 0.0;  // sum of `pieces`
  // ‖∇u‖², ∫(m² - q²χ² - q²χξ)u², 2Aξ̄, Aη̄
  std::array<double, 4> pieces{};
  double qu_l3 = 0.0;
  double eta_mean = 0.0;
  double xi_mean = 0.0;
  std::optional<double> lower_bound;  // bracket bound, finite when the δ̂-condition holds
  std::optional<double> upper_bound;
  double c1 = 0.0;
  double c2 = 0.0;
};

JReport evaluate_J(const ReducedProblem& p, const ScalarField& u,
                   const ConstantsEstimate* constants = nullptr);

// J(u) = F(u, Φ(u)) only (one screened solve); the value used by line searches.
double J_value(const ReducedProblem& p, const ScalarField& u);
double F_value(const ReducedProblem& p, const ScalarField& u, const ScalarField& phi);

struct Gradient {
  ScalarField riesz;          // H¹₀ representative g
  std::vector<double> dual;   // J'(u) as a nodal dual vector
  ScalarField phi;            // Φ(u) used to build it
  double norm = 0.0;          // ‖g‖_{H¹₀}
};

Gradient gradient_J(const ReducedProblem& p, const ScalarField& u);
// Same, reusing a known Φ(u).
Gradient gradient_J(const ReducedProblem& p, const ScalarField& u, const ScalarField& phi);

// Dual Hessian action J''(u) v, linearizing Φ exactly (no assembled matrix).
std::vector<double> hessian_dual_apply(const ReducedProblem& p, const ScalarField& u,
                                       const ScalarField& phi, const ScalarField& v);

struct FullResidual {
  double u_equation_l2 = 0.0;    // Δu - m²u + q²(φ+χ)²u on interior nodes
  double u_equation_max = 0.0;
  double phi_equation_l2 = 0.0;  // Δφ - (qu)²(φ+χ) + A/|Ω|, interior rows
  double phi_equation_max = 0.0;
  double phi_boundary_l2 = 0.0;  // ghost-node zero-flux rows
  double phi_boundary_max = 0.0;
  double u_boundary_max = 0.0;   // max |u| on the boundary
  // Same second equation written for the original potential φ + χ with flux α.
  double original_phi_equation_l2 = 0.0;
  ScalarField original_phi;

  double worst_l2() const;
};

FullResidual full_residual(const ReducedProblem& p, const ScalarField& u, const ScalarField& phi);

// Bounds on η used by the invariant suite.
double grad_eta_bound(double gamma, double qu_l3, double eta_mean);
double eta_mean_lower_bound(double flux, double gamma, double qu_l3, double volume);

}  // namespace kgm
