#pragma once

// The two linear Neumann problems everything else rests on:
//   * the flux problem  Δχ = A/|Ω|,  ∂χ/∂ν = α,  ∫χ = 0;
//   * the screened problem  -Δφ + b²φ = ρ  with homogeneous Neumann data.
//
// Both use the ghost-node finite-difference Laplacian. Multiplied by the
// lumped weights it becomes the symmetric stiffness matrix K (an M-matrix),
// so  K + diag(w b²)  has a nonnegative inverse whenever b ≢ 0.

#include <optional>
#include <span>
#include <vector>

#include "kgm/grid.hpp"
#include "kgm/linalg.hpp"

namespace kgm {

struct LinearSolverOptions {
  double tol = 1e-10;
  double max_iter_factor = 10.0;  // iteration cap = factor * unknowns
};

// y = K x on all nodes (natural / zero-flux boundary rows).
void stiffness_apply(const Grid& g, std::span<const double> x, std::span<double> y);
std::vector<double> stiffness_diagonal(const Grid& g);

// Dual vector of a nodal density: (W ρ)_i = w_i ρ_i.
std::vector<double> lumped_dual(const ScalarField& rho);

// Solves K_D g = d on interior nodes (zero Dirichlet data); this is the H¹₀
// Riesz map of the functional v ↦ d·v.
ScalarField riesz_dirichlet(const GridPtr& grid, std::span<const double> dual,
                            const LinearSolverOptions& opts,
                            linalg::KrylovReport* report = nullptr);

// Solves K y = r for r with Σr = 0, normalized to ∫y = 0.
ScalarField solve_neumann_laplacian(const GridPtr& grid, std::span<const double> dual,
                                    const LinearSolverOptions& opts,
                                    linalg::KrylovReport* report = nullptr);

struct ChiSolution {
  ScalarField chi;
  double flux = 0.0;      // A = ∫_{∂Ω} α dσ
  double chi_inf = 0.0;   // ‖χ‖∞
  double mean = 0.0;      // ∫χ / |Ω| after normalization
  double interior_residual = 0.0;  // max |Δ_h χ - A/|Ω|| over interior nodes
  double boundary_residual = 0.0;  // max nodal residual of the ghost-node boundary rows
  linalg::KrylovReport solve;
};

ChiSolution solve_chi(const BoundaryField& alpha, const LinearSolverOptions& opts = {});

// Flux dual vector of a boundary field: Σ over slots of α w_slot at the slot's node.
std::vector<double> boundary_dual(const BoundaryField& alpha);

// The operator A_b: φ ↦ -Δφ + b²φ with zero-flux boundary, in dual form
// K + diag(w b²). Immutable once built.
class ScreenedOperator {
 public:
  explicit ScreenedOperator(ScalarField b);

  const ScalarField& b() const { return b_; }
  const GridPtr& grid() const { return b_.grid; }
  bool singular() const { return mass_total_ == 0.0; }
  double b_l3() const { return b_l3_; }

  void apply(std::span<const double> x, std::span<double> y) const;
  // Solves (K + W b²) φ = rhs for a dual right-hand side.
  ScalarField solve_dual(std::span<const double> rhs, const LinearSolverOptions& opts,
                         linalg::KrylovReport* report = nullptr) const;

 private:
  ScalarField b_;
  std::vector<double> mass_;  // w_i b_i²
  std::vector<double> diag_;
  double mass_total_ = 0.0;
  double b_l3_ = 0.0;
};

// Nodal representation of A_b φ.
std::vector<double> apply_screened(const ScreenedOperator& op, const ScalarField& phi);

// φ = L_b(ρ) for a nodal density ρ (dual pairing by quadrature).
ScalarField solve_screened(const ScreenedOperator& op, const ScalarField& rho,
                           const LinearSolverOptions& opts = {},
                           linalg::KrylovReport* report = nullptr);

struct CoercivityOptions {
  double tol = 1e-12;  // relative change of the Rayleigh quotient
  int max_iter = 20000;
  LinearSolverOptions linear{1e-13, 10.0};
};

// c_b = inf ⟨A_b φ, φ⟩ / ‖φ‖², ‖φ‖² = ‖∇φ‖² + φ̄², by inverse iteration on the
// generalized eigenproblem (K + W b²) x = λ (K + w wᵀ/|Ω|²) x.
double coercivity_estimate(const ScreenedOperator& op, const CoercivityOptions& opts = {});

// ‖φ‖ = (‖∇φ‖² + φ̄²)^{1/2}
double h1_norm(const ScalarField& phi);
// Dual norm sup_φ ⟨r, φ⟩ / ‖φ‖ of a dual vector.
double h1_dual_norm(const GridPtr& grid, std::span<const double> dual,
                    const LinearSolverOptions& opts = {});

}  // namespace kgm
