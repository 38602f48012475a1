#include "kgm/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "kgm/error.hpp"
#include "kgm/generators.hpp"

namespace kgm {

ReducedProblem ReducedProblem::assemble(double m, ScalarField q, BoundaryField alpha,
                                        ProblemTolerances tol) {
  if (!q.grid || !alpha.grid || !q.grid->same_shape(*alpha.grid))
    throw Error(ErrorCode::InvalidArgument, "q and alpha must live on the same grid");
  ReducedProblem p;
  p.m_ = m;
  p.q_l6_ = norm(q, NormKind::L6);
  if (!(p.q_l6_ > 0.0))
    throw Error(ErrorCode::InvalidArgument, "coupling coefficient q must not vanish identically");
  p.q_ = std::move(q);
  p.q_.space = Space::Neumann;
  p.alpha_ = std::move(alpha);
  p.tol_ = tol;
  p.chi_ = solve_chi(p.alpha_, tol.linear);
  p.alpha_half_ = h_half_norm(p.alpha_);

  double abs_flux = 0.0;
  const auto slots = p.alpha_.grid->slots();
  for (std::size_t k = 0; k < slots.size(); ++k) abs_flux += slots[k].weight * std::abs(p.alpha_.values[k]);
  p.nonexistence_ = std::abs(p.chi_.flux) <= 1e-12 * abs_flux || abs_flux == 0.0;
  return p;
}

namespace {

ScalarField coupling_field(const ReducedProblem& p, const ScalarField& u) {
  ScalarField b(p.grid(), Space::Neumann);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = p.q()[i] * u[i];
  return b;
}

}  // namespace

LambdaDiagnostic lambda_diagnostic(const ReducedProblem& p, const ScalarField& u) {
  LambdaDiagnostic d;
  d.qu_l3 = norm(coupling_field(p, u), NormKind::L3);
  d.member = d.qu_l3 > p.tolerances().tol_lambda;
  return d;
}

void require_admissible(const ReducedProblem& p, const ScalarField& u) {
  if (u.space != Space::Dirichlet)
    throw Error(ErrorCode::SpaceMismatch, "the matter field u must be a Dirichlet field");
  const auto d = lambda_diagnostic(p, u);
  if (!d.member) {
    std::ostringstream os;
    os << "u is outside Λ_q: ‖q u‖₃ = " << d.qu_l3 << " ≤ tol_lambda = " << p.tolerances().tol_lambda
       << " (q u must not vanish)";
    throw Error(ErrorCode::LambdaViolation, os.str());
  }
}

PhiDecomposition phi_of(const ReducedProblem& p, const ScalarField& u, const PhiThresholds& th) {
  require_admissible(p, u);
  const Grid& g = *p.grid();
  const auto w = g.weights();
  const double A = p.flux();
  const ScreenedOperator op(coupling_field(p, u));
  const auto& chi = p.chi().chi;

  std::vector<double> rhs_eta(g.size()), rhs_xi(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double b = p.q()[i] * u[i];
    rhs_eta[i] = w[i] * A / g.volume();
    rhs_xi[i] = -w[i] * b * b * chi[i];
  }

  PhiDecomposition d;
  d.eta = op.solve_dual(rhs_eta, p.tolerances().linear);
  d.xi = op.solve_dual(rhs_xi, p.tolerances().linear);
  d.phi = d.eta + d.xi;
  d.eta_mean = mean(d.eta);
  d.xi_mean = mean(d.xi);

  std::vector<double> a_eta(g.size()), a_xi(g.size());
  op.apply(d.eta.values, a_eta);
  op.apply(d.xi.values, a_xi);
  d.min_a_eta = std::numeric_limits<double>::infinity();
  double flux = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    d.eta_residual = std::max(d.eta_residual, std::abs(a_eta[i] - rhs_eta[i]) / w[i]);
    d.xi_residual = std::max(d.xi_residual, std::abs(a_xi[i] - rhs_xi[i]) / w[i]);
    d.min_a_eta = std::min(d.min_a_eta, A * d.eta[i]);
    const double b = p.q()[i] * u[i];
    flux += w[i] * b * b * d.eta[i];
  }
  d.xi_inf = norm(d.xi, NormKind::Linf);
  d.chi_inf = p.chi().chi_inf;
  d.flux_integral = flux;
  d.flux_relative_error = A != 0.0 ? std::abs(flux - A) / std::abs(A) : std::abs(flux);

  d.sign_ok = d.min_a_eta >= -th.sign_tol;
  d.xi_bound_ok = d.xi_inf <= d.chi_inf * (1.0 + th.xi_rel) + 1e-300;
  d.flux_ok = d.flux_relative_error <= th.flux_rel;
  return d;
}

ScalarField solve_phi(const ReducedProblem& p, const ScalarField& u) {
  require_admissible(p, u);
  const Grid& g = *p.grid();
  const auto w = g.weights();
  const ScreenedOperator op(coupling_field(p, u));
  std::vector<double> rhs(g.size());
  const double source = p.flux() / g.volume();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double b = p.q()[i] * u[i];
    rhs[i] = w[i] * (source - b * b * p.chi().chi[i]);
  }
  return op.solve_dual(rhs, p.tolerances().linear);
}

double F_value(const ReducedProblem& p, const ScalarField& u, const ScalarField& phi) {
  const Grid& g = *p.grid();
  const auto w = g.weights();
  const auto& chi = p.chi().chi;
  const double m2 = p.m() * p.m();
  double potential = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double s = phi[i] + chi[i];
    const double q = p.q()[i];
    potential += w[i] * (m2 - q * q * s * s) * u[i] * u[i];
  }
  return gradient_energy(u) + potential - gradient_energy(phi) + 2.0 * p.flux() * mean(phi);
}

double J_value(const ReducedProblem& p, const ScalarField& u) {
  return F_value(p, u, solve_phi(p, u));
}

JReport evaluate_J(const ReducedProblem& p, const ScalarField& u, const ConstantsEstimate* constants) {
  const PhiDecomposition d = phi_of(p, u);
  const Grid& g = *p.grid();
  const auto w = g.weights();
  const auto& chi = p.chi().chi;
  const double A = p.flux();
  const double m2 = p.m() * p.m();

  JReport r;
  r.value = F_value(p, u, d.phi);
  const double grad_u = gradient_energy(u);
  double potential = 0.0, coupling = 0.0, decomposed_potential = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q2 = p.q()[i] * p.q()[i];
    const double u2 = u[i] * u[i];
    potential += w[i] * (m2 - q2 * chi[i] * chi[i]) * u2;
    coupling += w[i] * q2 * u2 * chi[i] * d.phi[i];
    decomposed_potential += w[i] * (m2 - q2 * chi[i] * chi[i] - q2 * chi[i] * d.xi[i]) * u2;
  }
  r.value_direct = grad_u + potential - coupling + A * mean(d.phi);
  r.pieces = {grad_u, decomposed_potential, 2.0 * A * d.xi_mean, A * d.eta_mean};
  r.value_decomposed = r.pieces[0] + r.pieces[1] + r.pieces[2] + r.pieces[3];
  r.eta_mean = d.eta_mean;
  r.xi_mean = d.xi_mean;
  r.qu_l3 = lambda_diagnostic(p, u).qu_l3;

  if (constants) {
    const double ks = constants->kappa * constants->sigma;
    const double qa = p.smallness();
    const double bracket = 1.0 - ks * ks * qa * qa;
    const double ka = constants->kappa * p.alpha_half_norm();
    if (qa < constants->delta && bracket > 0.0)
      r.lower_bound = bracket * grad_u - 2.0 * std::abs(A) * ka + A * d.eta_mean;
    r.c1 = 1.0 + m2 * std::cbrt(g.volume()) * constants->sigma * constants->sigma + ks * ks * qa * qa;
    r.c2 = 2.0 * std::abs(A) * ka;
    r.upper_bound = r.c1 * grad_u + r.c2 + std::abs(A) * std::abs(d.eta_mean);
  }
  return r;
}

Gradient gradient_J(const ReducedProblem& p, const ScalarField& u) {
  return gradient_J(p, u, solve_phi(p, u));
}

Gradient gradient_J(const ReducedProblem& p, const ScalarField& u, const ScalarField& phi) {
  const Grid& g = *p.grid();
  const auto w = g.weights();
  const auto& chi = p.chi().chi;
  const double m2 = p.m() * p.m();
  Gradient out;
  out.dual.resize(g.size());
  stiffness_apply(g, u.values, out.dual);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.is_boundary(i)) {
      out.dual[i] = 0.0;
      continue;
    }
    const double s = phi[i] + chi[i];
    const double q2 = p.q()[i] * p.q()[i];
    out.dual[i] = 2.0 * (out.dual[i] + w[i] * (m2 - q2 * s * s) * u[i]);
  }
  out.riesz = riesz_dirichlet(p.grid(), out.dual, p.tolerances().linear);
  out.norm = std::sqrt(std::max(0.0, linalg::dot(out.dual, out.riesz.values)));
  out.phi = phi;
  return out;
}

std::vector<double> hessian_dual_apply(const ReducedProblem& p, const ScalarField& u,
                                       const ScalarField& phi, const ScalarField& v) {
  const Grid& g = *p.grid();
  const auto w = g.weights();
  const auto& chi = p.chi().chi;
  const double m2 = p.m() * p.m();
  const ScreenedOperator op(coupling_field(p, u));

  // Linearized constraint: (K + W b²) φ' = -W 2 q² u v (φ + χ).
  std::vector<double> src(g.size()), s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    s[i] = p.q()[i] * p.q()[i] * (phi[i] + chi[i]) * u[i];
    src[i] = -2.0 * w[i] * s[i] * v[i];
  }
  const ScalarField dphi = op.solve_dual(src, p.tolerances().linear);

  std::vector<double> out(g.size());
  stiffness_apply(g, v.values, out);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.is_boundary(i)) {
      out[i] = 0.0;
      continue;
    }
    const double t = phi[i] + chi[i];
    const double q2 = p.q()[i] * p.q()[i];
    out[i] = 2.0 * (out[i] + w[i] * (m2 - q2 * t * t) * v[i] - 2.0 * w[i] * s[i] * dphi[i]);
  }
  return out;
}

double sobolev_ascent(ScalarField u, int max_iter, double tol, const LinearSolverOptions& linear) {
  const GridPtr grid = u.grid;
  const auto w = grid->weights();
  u.space = Space::Dirichlet;
  u.enforce_space();
  double best = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double gn = std::sqrt(gradient_energy(u));
    if (!(gn > 0.0)) break;
    const double q = norm(u, NormKind::L3) / gn;
    if (it > 0 && q <= best * (1.0 + tol)) {
      best = std::max(best, q);
      break;
    }
    best = std::max(best, q);
    for (double& v : u.values) v /= gn;
    // Maximize the linearization of ‖u‖₃³ over the unit H¹₀ ball.
    std::vector<double> dual(grid->size());
    for (std::size_t i = 0; i < dual.size(); ++i) dual[i] = w[i] * std::abs(u[i]) * u[i];
    u = riesz_dirichlet(grid, dual, linear);
  }
  return best;
}

double poincare_ascent(ScalarField f, int max_iter, double tol, const LinearSolverOptions& linear) {
  const GridPtr grid = f.grid;
  const auto w = grid->weights();
  f.space = Space::Neumann;
  double best = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const double fm = mean(f);
    for (double& v : f.values) v -= fm;
    const double gn = std::sqrt(gradient_energy(f));
    if (!(gn > 0.0)) break;
    const double q = norm(f, NormKind::L3) / gn;
    if (it > 0 && q <= best * (1.0 + tol)) {
      best = std::max(best, q);
      break;
    }
    best = std::max(best, q);
    for (double& v : f.values) v /= gn;
    std::vector<double> dual(grid->size());
    double total = 0.0;
    for (std::size_t i = 0; i < dual.size(); ++i) {
      dual[i] = w[i] * std::abs(f[i]) * f[i];
      total += dual[i];
    }
    for (std::size_t i = 0; i < dual.size(); ++i) dual[i] -= w[i] * total / grid->volume();
    f = solve_neumann_laplacian(grid, dual, linear);
  }
  return best;
}

ConstantsEstimate estimate_constants(const GridPtr& grid, const std::vector<BoundaryField>& alpha_samples,
                                     const ConstantsOptions& opts) {
  ConstantsEstimate c;
  for (const auto& a : alpha_samples) {
    const double an = h_half_norm(a);
    if (!(an > 0.0)) continue;
    const ChiSolution chi = solve_chi(a, opts.linear);
    const double ratio = chi.chi_inf / an;
    c.kappa_samples.push_back(ratio);
    c.kappa = std::max(c.kappa, ratio);
  }
  if (c.kappa_samples.empty())
    throw Error(ErrorCode::InvalidArgument, "estimate_constants needs at least one nonzero α sample");

  std::mt19937_64 rng(opts.seed);
  for (int r = 0; r < opts.restarts; ++r) {
    ScalarField start = r == 0 ? gen::dirichlet_mode(grid, {1, 1, 1}) : gen::random_dirichlet(grid, rng, 0.3);
    c.sigma = std::max(c.sigma, sobolev_ascent(start, opts.max_iter, opts.tol, opts.linear));
  }
  for (int r = 0; r < opts.restarts; ++r) {
    ScalarField start(grid, Space::Neumann);
    if (r == 0) {
      for (std::size_t i = 0; i < grid->size(); ++i)
        start[i] = std::cos(std::numbers::pi * grid->position(i)[0] / grid->extent(0));
    } else {
      start = gen::random_nodal(grid, rng, Space::Neumann);
      // Smooth the noise a little so the ascent starts from a resolved field.
      const auto w = grid->weights();
      std::vector<double> dual(grid->size());
      double total = 0.0;
      for (std::size_t i = 0; i < dual.size(); ++i) total += (dual[i] = w[i] * start[i]);
      for (std::size_t i = 0; i < dual.size(); ++i) dual[i] -= w[i] * total / grid->volume();
      start = solve_neumann_laplacian(grid, dual, opts.linear);
    }
    c.gamma = std::max(c.gamma, poincare_ascent(start, opts.max_iter, opts.tol, opts.linear));
  }
  c.delta = 1.0 / (c.kappa * c.sigma);
  return c;
}

double FullResidual::worst_l2() const {
  return std::max({u_equation_l2, phi_equation_l2, phi_boundary_l2, u_boundary_max});
}

FullResidual full_residual(const ReducedProblem& p, const ScalarField& u, const ScalarField& phi) {
  const Grid& g = *p.grid();
  const auto w = g.weights();
  const auto& chi = p.chi().chi;
  const double m2 = p.m() * p.m();
  const double source = p.flux() / g.volume();

  std::vector<double> ku(g.size()), kphi(g.size());
  stiffness_apply(g, u.values, ku);
  stiffness_apply(g, phi.values, kphi);

  FullResidual r;
  double u_l2 = 0.0, phi_l2 = 0.0, phib_l2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double q2 = p.q()[i] * p.q()[i];
    const double s = phi[i] + chi[i];
    const double b2 = q2 * u[i] * u[i];
    // Strong forms: K x / w is -Δ_h x including the ghost-node boundary rows.
    const double rphi = kphi[i] / w[i] + b2 * s - source;
    if (g.is_boundary(i)) {
      r.u_boundary_max = std::max(r.u_boundary_max, std::abs(u[i]));
      phib_l2 += w[i] * rphi * rphi;
      r.phi_boundary_max = std::max(r.phi_boundary_max, std::abs(rphi));
    } else {
      const double ru = ku[i] / w[i] + (m2 - q2 * s * s) * u[i];
      u_l2 += w[i] * ru * ru;
      r.u_equation_max = std::max(r.u_equation_max, std::abs(ru));
      phi_l2 += w[i] * rphi * rphi;
      r.phi_equation_max = std::max(r.phi_equation_max, std::abs(rphi));
    }
  }
  r.u_equation_l2 = std::sqrt(u_l2);
  r.phi_equation_l2 = std::sqrt(phi_l2);
  r.phi_boundary_l2 = std::sqrt(phib_l2);

  // Original potential: -Δφ_o + (qu)² φ_o = 0 with ∂φ_o/∂ν = α.
  r.original_phi = phi + chi;
  std::vector<double> ko(g.size());
  stiffness_apply(g, r.original_phi.values, ko);
  const auto flux = boundary_dual(p.alpha());
  double o_l2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double b2 = p.q()[i] * p.q()[i] * u[i] * u[i];
    const double ro = (ko[i] - flux[i]) / w[i] + b2 * r.original_phi[i];
    o_l2 += w[i] * ro * ro;
  }
  r.original_phi_equation_l2 = std::sqrt(o_l2);
  return r;
}

double grad_eta_bound(double gamma, double qu_l3, double eta_mean) {
  return gamma * qu_l3 * qu_l3 * std::abs(eta_mean);
}

double eta_mean_lower_bound(double flux, double gamma, double qu_l3, double volume) {
  const double q2 = qu_l3 * qu_l3;
  return std::abs(flux) / (q2 * (gamma * gamma * q2 + std::cbrt(volume)));
}

}  // namespace kgm
