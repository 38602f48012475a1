#include "kgm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "kgm/error.hpp"
#include "kgm/generators.hpp"

namespace kgm {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterationCap: return "iteration-cap";
    case SolveStatus::LineSearchFailure: return "line-search-failure";
    case SolveStatus::LeftLambda: return "left-lambda";
    case SolveStatus::Diverged: return "diverged";
    case SolveStatus::Decayed: return "decayed";
  }
  return "unknown";
}

ScalarField symmetrize(const ScalarField& u) {
  ScalarField out = u;
  for (double& v : out.values) v = std::abs(v);
  return out;
}

ScalarField default_seed(const GridPtr& grid, std::uint64_t seed, double scale, double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ScalarField u = gen::dirichlet_mode(grid, {1, 1, 1});
  for (double& v : u.values) v = scale * (v + noise * normal(rng));
  u.enforce_space();
  return u;
}

double h10_distance(const ScalarField& a, const ScalarField& b) {
  return std::sqrt(gradient_energy(a - b));
}

namespace {

struct Point {
  ScalarField u;
  ScalarField phi;
  double J = 0.0;
  Gradient grad;
  double qu_l3 = 0.0;
};

// Returns false when u is outside Λ_q or a linear solve fails.
bool evaluate_point(const ReducedProblem& p, const ScalarField& u, Point& out, bool with_gradient) {
  const auto lam = lambda_diagnostic(p, u);
  if (!lam.member) return false;
  try {
    out.u = u;
    out.phi = solve_phi(p, u);
    out.J = F_value(p, u, out.phi);
    out.qu_l3 = lam.qu_l3;
    if (with_gradient) out.grad = gradient_J(p, u, out.phi);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotConverged || e.code() == ErrorCode::LambdaViolation) return false;
    throw;
  }
  return std::isfinite(out.J);
}

ScalarField step(const ScalarField& u, double s, const ScalarField& dir) {
  ScalarField out = u;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * dir[i];
  out.enforce_space();
  return out;
}

// One descent phase from `start`; appends to the histories of `res`.
void descend(const ReducedProblem& p, const ScalarField& start, const MinimizeOptions& opts, SolveResult& res,
             double grad_u_ref) {
  Point cur;
  if (!evaluate_point(p, start, cur, true)) {
    res.status = SolveStatus::LeftLambda;
    res.message = "starting point is outside Λ_q or its potential could not be computed";
    res.u = start;
    return;
  }
  auto record = [&](const Point& pt) {
    res.J_history.push_back(pt.J);
    res.qu_l3_history.push_back(pt.qu_l3);
    res.grad_u_history.push_back(std::sqrt(gradient_energy(pt.u)));
  };
  record(cur);

  res.status = SolveStatus::IterationCap;
  while (true) {
    const double grad_u = res.grad_u_history.back();
    if (opts.observer) {
      IterateInfo info;
      info.iteration = res.iterations;
      info.u = &cur.u;
      info.phi = &cur.phi;
      info.J = cur.J;
      info.grad_norm = cur.grad.norm;
      info.grad_u = grad_u;
      info.qu_l3 = cur.qu_l3;
      opts.observer(info);
    }
    if (cur.grad.norm <= opts.tol_grad) {
      res.status = SolveStatus::Converged;
      break;
    }
    if (opts.decay_ratio > 0.0 && grad_u <= opts.decay_ratio * grad_u_ref) {
      res.status = SolveStatus::Decayed;
      break;
    }
    if (grad_u > opts.divergence_limit || !std::isfinite(cur.J)) {
      res.status = SolveStatus::Diverged;
      break;
    }
    if (res.iterations >= opts.max_iter) {
      res.status = SolveStatus::IterationCap;
      break;
    }

    const double slope = cur.grad.norm * cur.grad.norm;
    // J is resolved to roughly this absolute accuracy; below it Armijo cannot
    // discriminate and the gradient norm decides instead.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(cur.J));
    double s = opts.initial_step;
    bool accepted = false;
    Point trial;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, s *= 0.5) {
      const ScalarField cand = step(cur.u, -s, cur.grad.riesz);
      if (!evaluate_point(p, cand, trial, false)) continue;
      if (trial.J <= cur.J - opts.armijo_c * s * slope && trial.J < cur.J) {
        accepted = true;
        break;
      }
      // Decrease below the resolution of J: accept on a smaller gradient.
      if (s * slope <= noise && trial.J <= cur.J + noise) {
        trial.grad = gradient_J(p, cand, trial.phi);
        if (trial.grad.norm < cur.grad.norm) {
          accepted = true;
          ++res.noise_steps;
          res.j_resolution = std::max(res.j_resolution, noise);
          break;
        }
      }
    }
    if (!accepted) {
      res.status = SolveStatus::LineSearchFailure;
      std::ostringstream os;
      os << "no decrease of J after " << opts.max_backtracks << " backtracks at iteration " << res.iterations
         << " (grad_norm " << cur.grad.norm << ")";
      res.message = os.str();
      break;
    }
    if (trial.grad.dual.empty()) trial.grad = gradient_J(p, trial.u, trial.phi);
    cur = std::move(trial);
    ++res.iterations;
    record(cur);
  }
  res.u = cur.u;
  res.phi = cur.phi;
  res.J_value = cur.J;
  res.grad_norm = cur.grad.norm;
}

void finish(const ReducedProblem& p, SolveResult& res) {
  res.converged = res.status == SolveStatus::Converged;
  if (lambda_diagnostic(p, res.u).member) {
    try {
      res.invariants = phi_of(p, res.u);
      res.invariants_evaluated = true;
    } catch (const Error&) {
      res.invariants_evaluated = false;
    }
  } else if (res.status == SolveStatus::Converged) {
    res.converged = false;
    res.status = SolveStatus::LeftLambda;
  }
}

}  // namespace

SolveResult minimize(const ReducedProblem& p, const ScalarField& u_init, const MinimizeOptions& opts) {
  if (u_init.space != Space::Dirichlet)
    throw Error(ErrorCode::SpaceMismatch, "minimize: the initial field must be a Dirichlet field");
  if (!(opts.tol_grad > 0.0) || opts.max_iter < 0 || !(opts.initial_step > 0.0))
    throw Error(ErrorCode::InvalidArgument, "minimize: tolerances and step must be positive");
  require_admissible(p, u_init);

  SolveResult res;
  const double grad_u_ref = std::sqrt(gradient_energy(u_init));
  descend(p, u_init, opts, res, grad_u_ref);
  if (opts.nonnegative && res.status == SolveStatus::Converged) {
    // |u| has the same potential; a second descent phase confirms stationarity.
    descend(p, symmetrize(res.u), opts, res, grad_u_ref);
    if (res.status == SolveStatus::Converged) {
      const ScalarField v = symmetrize(res.u);
      if (v.values != res.u.values) {
        Point pt;
        if (evaluate_point(p, v, pt, true)) {
          res.u = pt.u;
          res.phi = pt.phi;
          res.J_value = pt.J;
          res.grad_norm = pt.grad.norm;
          if (pt.grad.norm > opts.tol_grad) res.status = SolveStatus::IterationCap;
        }
      }
    }
  }
  finish(p, res);
  return res;
}

namespace {

struct Deflation {
  std::vector<ScalarField> known;

  // M(u) = 1 + Σ_j (‖u - u_j‖⁻² + ‖u + u_j‖⁻²)
  double value(const ScalarField& u) const {
    double m = 1.0;
    for (const auto& k : known) m += 1.0 / gradient_energy(u - k) + 1.0 / gradient_energy(u + k);
    return m;
  }

  // Directional derivative of M at u along d.
  double derivative(const ScalarField& u, const ScalarField& d) const {
    std::vector<double> kd(d.size());
    stiffness_apply(*u.grid, d.values, kd);
    double s = 0.0;
    for (const auto& k : known) {
      for (double sign : {-1.0, 1.0}) {
        const ScalarField e = u + sign * k;
        const double n2 = gradient_energy(e);
        s += -2.0 * linalg::dot(e.values, kd) / (n2 * n2);
      }
    }
    return s;
  }
};

}  // namespace

SolveResult newton_solve(const ReducedProblem& p, const ScalarField& u_init, const MinimizeOptions& opts,
                         const std::vector<ScalarField>& deflate, int max_iter) {
  require_admissible(p, u_init);
  const Grid& g = *p.grid();
  const Deflation defl{deflate};

  SolveResult res;
  Point cur;
  if (!evaluate_point(p, u_init, cur, true)) {
    res.status = SolveStatus::LeftLambda;
    res.u = u_init;
    finish(p, res);
    return res;
  }
  auto record = [&](const Point& pt) {
    res.J_history.push_back(pt.J);
    res.qu_l3_history.push_back(pt.qu_l3);
    res.grad_u_history.push_back(std::sqrt(gradient_energy(pt.u)));
  };
  record(cur);

  const auto& lin = p.tolerances().linear;
  auto precond = [&](std::span<const double> r, std::span<double> z) {
    const ScalarField y = riesz_dirichlet(p.grid(), r, lin);
    std::copy(y.values.begin(), y.values.end(), z.begin());
  };

  double merit = defl.value(cur.u) * cur.grad.norm;
  res.status = SolveStatus::IterationCap;
  while (true) {
    if (cur.grad.norm <= opts.tol_grad) {
      res.status = SolveStatus::Converged;
      break;
    }
    if (res.iterations >= max_iter) break;
    if (std::sqrt(gradient_energy(cur.u)) > opts.divergence_limit) {
      res.status = SolveStatus::Diverged;
      break;
    }

    // Newton direction: J''(u) δ = -J'(u), preconditioned by the H¹₀ Riesz map.
    auto apply = [&](std::span<const double> x, std::span<double> y) {
      ScalarField v(p.grid(), Space::Dirichlet, std::vector<double>(x.begin(), x.end()));
      const auto hv = hessian_dual_apply(p, cur.u, cur.phi, v);
      std::copy(hv.begin(), hv.end(), y.begin());
    };
    std::vector<double> rhs(g.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -cur.grad.dual[i];
    ScalarField delta(p.grid(), Space::Dirichlet);
    linalg::KrylovOptions ko;
    ko.tol = std::clamp(0.1 * cur.grad.norm, 1e-10, 1e-2);
    ko.max_iter = 4 * g.interior_nodes().size();
    linalg::minres(apply, precond, rhs, std::span<double>(delta.values), ko);
    delta.enforce_space();

    if (!defl.known.empty()) {
      const double m = defl.value(cur.u);
      const double dm = defl.derivative(cur.u, delta);
      const double denom = 1.0 - dm / m;
      if (denom > 1e-12) delta = (1.0 / denom) * delta;
    }

    bool accepted = false;
    Point trial;
    double s = 1.0;
    double trial_merit = 0.0;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, s *= 0.5) {
      const ScalarField cand = step(cur.u, s, delta);
      if (!evaluate_point(p, cand, trial, true)) continue;
      trial_merit = defl.value(cand) * trial.grad.norm;
      if (trial_merit < (1.0 - 1e-4 * s) * merit) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.status = SolveStatus::LineSearchFailure;
      res.message = "Newton line search failed to reduce the (deflated) residual";
      break;
    }
    cur = std::move(trial);
    merit = trial_merit;
    ++res.iterations;
    record(cur);
  }
  res.u = cur.u;
  res.phi = cur.phi;
  res.J_value = cur.J;
  res.grad_norm = cur.grad.norm;
  finish(p, res);
  return res;
}

MultistartResult multistart_deflate(const ReducedProblem& p, const DeflationOptions& opts) {
  if (opts.k < 1) throw Error(ErrorCode::InvalidArgument, "multistart_deflate: k must be at least 1");
  if (p.nonexistence_regime())
    throw Error(ErrorCode::InvalidArgument, "multistart_deflate requires a nonzero total flux A");
  const GridPtr& grid = p.grid();

  MultistartResult out;
  out.requested = opts.k;

  MinimizeOptions first_opts = opts.minimize;
  first_opts.nonnegative = true;
  SolveResult first = minimize(p, default_seed(grid, opts.seed, opts.seed_scale, opts.seed_noise), first_opts);
  ++out.attempts;
  const double amplitude = first.converged ? std::sqrt(gradient_energy(first.u)) : 1.0;
  if (first.converged) out.points.push_back(std::move(first));

  // Sign-changing seeds from higher Dirichlet modes, scaled like the minimizer.
  std::vector<std::array<int, 3>> modes = {{2, 1, 1}, {1, 2, 1}, {1, 1, 2}, {2, 2, 1}, {2, 1, 2},
                                           {1, 2, 2}, {3, 1, 1}, {1, 3, 1}, {1, 1, 3}, {2, 2, 2}};
  if (grid->dim() == 2) modes = {{2, 1, 1}, {1, 2, 1}, {2, 2, 1}, {3, 1, 1}, {1, 3, 1}, {3, 2, 1}};
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int max_attempts = opts.k * opts.attempts_per_point;
  for (std::size_t a = 0; static_cast<int>(out.points.size()) < opts.k && out.attempts < max_attempts; ++a) {
    ++out.attempts;
    ScalarField seed = gen::dirichlet_mode(grid, modes[a % modes.size()]);
    for (double& v : seed.values) v += opts.seed_noise * normal(rng);
    seed.enforce_space();
    seed = (amplitude / std::sqrt(gradient_energy(seed))) * seed;
    if (!lambda_diagnostic(p, seed).member) continue;

    std::vector<ScalarField> known;
    for (const auto& pt : out.points) known.push_back(pt.u);
    MinimizeOptions nopts = opts.minimize;
    nopts.tol_grad = std::min(opts.minimize.tol_grad, 1e-3);
    SolveResult cand = newton_solve(p, seed, nopts, known, opts.newton_max_iter);
    if (!cand.converged) continue;
    // Undeflated re-verification.
    SolveResult check = newton_solve(p, cand.u, opts.minimize, {}, 20);
    if (!check.converged) continue;
    bool distinct = true;
    for (const auto& pt : out.points) {
      const double d = std::min(h10_distance(check.u, pt.u), h10_distance(check.u, -pt.u));
      if (d <= opts.sep_tol) distinct = false;
    }
    if (distinct) out.points.push_back(std::move(check));
  }

  std::sort(out.points.begin(), out.points.end(),
            [](const SolveResult& x, const SolveResult& y) { return x.J_value < y.J_value; });
  out.j_strictly_increasing = out.points.size() >= 2;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    const double scale = std::max(1.0, std::abs(out.points[i].J_value));
    if (!(out.points[i].J_value - out.points[i - 1].J_value > 1e-8 * scale)) out.j_strictly_increasing = false;
  }
  if (static_cast<int>(out.points.size()) < opts.k) {
    std::ostringstream os;
    os << "found " << out.points.size() << " of " << opts.k << " requested critical-point candidates";
    out.warning = os.str();
  }
  return out;
}

}  // namespace kgm
