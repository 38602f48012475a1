#include "kgm/elliptic.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kgm/error.hpp"

namespace kgm {

using linalg::KrylovOptions;
using linalg::KrylovReport;
using linalg::Vec;

namespace {

KrylovOptions krylov_options(const LinearSolverOptions& opts, std::size_t unknowns,
                             std::span<const double> diag = {}) {
  KrylovOptions k;
  k.tol = opts.tol;
  // Gershgorin: the row sums of |K + W b²| are at most twice the diagonal.
  for (double d : diag) k.operator_norm = std::max(k.operator_norm, 2.0 * d);
  k.max_iter = static_cast<std::size_t>(std::max(1.0, opts.max_iter_factor * unknowns));
  return k;
}

[[noreturn]] void throw_not_converged(const char* what, const KrylovReport& rep) {
  std::ostringstream os;
  os << what << " did not converge: relative residual " << rep.relative_residual << " after "
     << rep.iterations << " iterations";
  throw Error(ErrorCode::NotConverged, os.str());
}

}  // namespace

void stiffness_apply(const Grid& g, std::span<const double> x, std::span<double> y) {
  const auto w = g.weights();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ijk = g.coords(i);
    double acc = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double c = w[i] / g.axis_weight(a, ijk[a]) / g.spacing(a);
      const std::size_t s = g.stride(a);
      if (ijk[a] > 0) acc += c * (x[i] - x[i - s]);
      if (ijk[a] < g.n(a) - 1) acc += c * (x[i] - x[i + s]);
    }
    y[i] = acc;
  }
}

std::vector<double> stiffness_diagonal(const Grid& g) {
  const auto w = g.weights();
  std::vector<double> d(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ijk = g.coords(i);
    for (int a = 0; a < g.dim(); ++a) {
      const double c = w[i] / g.axis_weight(a, ijk[a]) / g.spacing(a);
      if (ijk[a] > 0) d[i] += c;
      if (ijk[a] < g.n(a) - 1) d[i] += c;
    }
  }
  return d;
}

std::vector<double> lumped_dual(const ScalarField& rho) {
  const auto w = rho.grid->weights();
  std::vector<double> r(rho.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = w[i] * rho[i];
  return r;
}

std::vector<double> boundary_dual(const BoundaryField& alpha) {
  std::vector<double> r(alpha.grid->size(), 0.0);
  const auto slots = alpha.grid->slots();
  for (std::size_t k = 0; k < slots.size(); ++k) r[slots[k].node] += slots[k].weight * alpha.values[k];
  return r;
}

ScalarField riesz_dirichlet(const GridPtr& grid, std::span<const double> dual,
                            const LinearSolverOptions& opts, KrylovReport* report) {
  const Grid& g = *grid;
  const auto diag = stiffness_diagonal(g);
  Vec b(dual.begin(), dual.end());
  for (std::size_t n : g.boundary_nodes()) b[n] = 0.0;

  auto apply = [&](std::span<const double> x, std::span<double> y) {
    stiffness_apply(g, x, y);
    for (std::size_t n : g.boundary_nodes()) y[n] = 0.0;
  };
  auto precond = [&](std::span<const double> r, std::span<double> z) {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = g.is_boundary(i) ? 0.0 : r[i] / diag[i];
  };
  ScalarField u(grid, Space::Dirichlet);
  const auto rep = linalg::pcg(apply, precond, b, std::span<double>(u.values),
                               krylov_options(opts, g.interior_nodes().size(), diag));
  if (report) *report = rep;
  if (!rep.converged) throw_not_converged("Dirichlet solve", rep);
  u.enforce_space();
  return u;
}

ScalarField solve_neumann_laplacian(const GridPtr& grid, std::span<const double> dual,
                                    const LinearSolverOptions& opts, KrylovReport* report) {
  const Grid& g = *grid;
  const auto diag = stiffness_diagonal(g);
  Vec b(dual.begin(), dual.end());
  const double shift = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  for (double& v : b) v -= shift;

  auto apply = [&](std::span<const double> x, std::span<double> y) { stiffness_apply(g, x, y); };
  auto precond = [&](std::span<const double> r, std::span<double> z) {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag[i];
  };
  // Residuals of the consistent singular system stay orthogonal to constants.
  auto project = [](std::span<double> r) {
    double s = 0.0;
    for (double v : r) s += v;
    s /= static_cast<double>(r.size());
    for (double& v : r) v -= s;
  };
  ScalarField y(grid, Space::Neumann);
  const auto rep = linalg::pcg(apply, precond, b, std::span<double>(y.values),
                               krylov_options(opts, g.size(), diag), project);
  if (report) *report = rep;
  if (!rep.converged) throw_not_converged("Neumann solve", rep);
  const double m = mean(y);
  for (double& v : y.values) v -= m;
  return y;
}

ChiSolution solve_chi(const BoundaryField& alpha, const LinearSolverOptions& opts) {
  const GridPtr& grid = alpha.grid;
  const Grid& g = *grid;
  ChiSolution sol;
  sol.flux = boundary_integral(alpha);
  const double source = sol.flux / g.volume();

  // K χ = (flux dual) - (A/|Ω|) w; the sum of the right-hand side is zero.
  Vec rhs = boundary_dual(alpha);
  const auto w = g.weights();
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= source * w[i];

  sol.chi = solve_neumann_laplacian(grid, rhs, opts, &sol.solve);
  sol.mean = mean(sol.chi);
  sol.chi_inf = norm(sol.chi, NormKind::Linf);

  Vec kchi(g.size());
  stiffness_apply(g, sol.chi.values, kchi);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = std::abs(kchi[i] - rhs[i]) / w[i];
    if (g.is_boundary(i)) sol.boundary_residual = std::max(sol.boundary_residual, r);
    else sol.interior_residual = std::max(sol.interior_residual, r);
  }
  return sol;
}

ScreenedOperator::ScreenedOperator(ScalarField b) : b_(std::move(b)) {
  const Grid& g = *b_.grid;
  const auto w = g.weights();
  mass_.resize(g.size());
  diag_ = stiffness_diagonal(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    mass_[i] = w[i] * b_[i] * b_[i];
    diag_[i] += mass_[i];
    mass_total_ += mass_[i];
  }
  b_l3_ = norm(b_, NormKind::L3);
}

void ScreenedOperator::apply(std::span<const double> x, std::span<double> y) const {
  stiffness_apply(*b_.grid, x, y);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += mass_[i] * x[i];
}

ScalarField ScreenedOperator::solve_dual(std::span<const double> rhs,
                                         const LinearSolverOptions& opts,
                                         KrylovReport* report) const {
  if (singular())
    throw Error(ErrorCode::LambdaViolation,
                "screened operator is singular: b = q u vanishes identically (u outside Λ_q)");
  auto apply_fn = [this](std::span<const double> x, std::span<double> y) { apply(x, y); };
  auto precond = [this](std::span<const double> r, std::span<double> z) {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag_[i];
  };
  ScalarField phi(b_.grid, Space::Neumann);
  const auto rep =
      linalg::pcg(apply_fn, precond, rhs, std::span<double>(phi.values), krylov_options(opts, rhs.size(), diag_));
  if (report) *report = rep;
  if (!rep.converged) throw_not_converged("screened solve", rep);
  return phi;
}

std::vector<double> apply_screened(const ScreenedOperator& op, const ScalarField& phi) {
  std::vector<double> y(phi.size());
  op.apply(phi.values, y);
  return y;
}

ScalarField solve_screened(const ScreenedOperator& op, const ScalarField& rho,
                           const LinearSolverOptions& opts, KrylovReport* report) {
  return op.solve_dual(lumped_dual(rho), opts, report);
}

double h1_norm(const ScalarField& phi) { return norm(phi, NormKind::H1); }

namespace {

// B x = K x + w (wᵀx) / |Ω|²  (Gram matrix of the H¹ norm)
void h1_gram_apply(const Grid& g, std::span<const double> x, std::span<double> y) {
  stiffness_apply(g, x, y);
  const auto w = g.weights();
  const double s = linalg::dot(w, x) / (g.volume() * g.volume());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += w[i] * s;
}

}  // namespace

double h1_dual_norm(const GridPtr& grid, std::span<const double> dual,
                    const LinearSolverOptions& opts) {
  const Grid& g = *grid;
  const auto w = g.weights();
  double c = 0.0;
  for (double v : dual) c += v;
  Vec r(dual.begin(), dual.end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= w[i] * c / g.volume();
  ScalarField y = solve_neumann_laplacian(grid, r, opts);
  for (double& v : y.values) v += c;
  return std::sqrt(std::max(0.0, linalg::dot(dual, y.values)));
}

double coercivity_estimate(const ScreenedOperator& op, const CoercivityOptions& opts) {
  if (op.singular())
    throw Error(ErrorCode::LambdaViolation, "coercivity constant undefined for b = 0");
  const Grid& g = *op.grid();
  const std::size_t n = g.size();

  // Start from a constant plus a smooth asymmetric perturbation.
  Vec x(n), bx(n), y(n), by(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = g.position(i);
    x[i] = 1.0 + 0.1 * (p[0] / g.extent(0)) + 0.05 * (p[1] / g.extent(1));
  }
  double lambda = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  int settled = 0;
  for (int it = 0; it < opts.max_iter; ++it) {
    h1_gram_apply(g, x, bx);
    ScalarField sol = op.solve_dual(bx, opts.linear);
    y = std::move(sol.values);
    h1_gram_apply(g, y, by);
    const double yby = linalg::dot(y, by);
    lambda = linalg::dot(y, bx) / yby;  // yᵀ A y / yᵀ B y since A y = B x
    const double scale = 1.0 / std::sqrt(yby);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] * scale;
    if (std::abs(lambda - prev) <= opts.tol * std::abs(lambda)) {
      if (++settled >= 3) return lambda;
    } else {
      settled = 0;
    }
    prev = lambda;
  }
  std::ostringstream os;
  os << "inverse iteration for the coercivity constant did not converge; last estimate "
     << lambda;
  throw Error(ErrorCode::NotConverged, os.str());
}

}  // namespace kgm
