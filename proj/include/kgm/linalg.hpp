#pragma once

// Small Krylov toolkit on std::vector<double>: preconditioned CG for SPD (or
// consistent semidefinite) systems and preconditioned MINRES for symmetric
// indefinite ones. Operators are passed as callables  y = op(x).

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <span>
#include <vector>

namespace kgm::linalg {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += t * x
inline void axpy(double t, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += t * x[i];
}

struct KrylovOptions {
  double tol = 1e-12;  // relative residual
  std::size_t max_iter = 1000;
  int max_restarts = 3;
  // Bound on the operator norm. When positive, a true residual at the
  // roundoff floor  8 eps |A| |x|  also counts as converged.
  double operator_norm = 0.0;
};

struct KrylovReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

struct NoProjection {
  void operator()(std::span<double>) const {}
};

// Preconditioned conjugate gradients. `project` is applied to every residual;
// it lets singular-but-consistent systems keep their residual in the range.
// After the recursive residual converges the true residual is checked and CG
// restarts from the current iterate if it drifted.
template <class Op, class Prec, class Proj = NoProjection>
KrylovReport pcg(Op&& apply, Prec&& precond, std::span<const double> b, std::span<double> x,
                 const KrylovOptions& opts, Proj&& project = {}) {
  const std::size_t n = b.size();
  KrylovReport rep;
  Vec r(n), z(n), p(n), q(n);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    rep.converged = true;
    return rep;
  }
  auto true_residual = [&] {
    apply(std::span<const double>(x), std::span<double>(q));
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    project(std::span<double>(r));
    return norm2(r);
  };

  auto target = [&] {
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * opts.operator_norm * norm2(x);
    return std::max(opts.tol * bnorm, floor);
  };
  double rnorm = true_residual();
  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    if (rnorm <= target()) break;
    precond(std::span<const double>(r), std::span<double>(z));
    p = z;
    double rz = dot(r, z);
    while (rep.iterations < opts.max_iter) {
      apply(std::span<const double>(p), std::span<double>(q));
      const double pq = dot(p, q);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      axpy(alpha, p, x);
      axpy(-alpha, q, r);
      project(std::span<double>(r));
      ++rep.iterations;
      if (norm2(r) <= opts.tol * bnorm) break;
      precond(std::span<const double>(r), std::span<double>(z));
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    rnorm = true_residual();
    if (rep.iterations >= opts.max_iter) break;
  }
  rep.relative_residual = rnorm / bnorm;
  rep.converged = rnorm <= target();
  return rep;
}

// Preconditioned MINRES (Paige-Saunders recurrences). `apply` must be
// symmetric, `precond` symmetric positive definite. The reported residual is
// the preconditioned norm  sqrt(r^T M^{-1} r) relative to the initial one.
template <class Op, class Prec>
KrylovReport minres(Op&& apply, Prec&& precond, std::span<const double> b, std::span<double> x,
                    const KrylovOptions& opts) {
  const std::size_t n = b.size();
  KrylovReport rep;
  std::fill(x.begin(), x.end(), 0.0);
  Vec r1(b.begin(), b.end()), r2 = r1, y(n), v(n), w(n, 0.0), w1(n, 0.0), w2(n, 0.0);
  precond(std::span<const double>(r1), std::span<double>(y));
  const double beta1_sq = dot(r1, y);
  if (!(beta1_sq > 0.0)) {
    rep.converged = true;
    return rep;
  }
  const double beta1 = std::sqrt(beta1_sq);
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;

  while (rep.iterations < opts.max_iter) {
    ++rep.iterations;
    const double s = 1.0 / beta;
    for (std::size_t i = 0; i < n; ++i) v[i] = s * y[i];
    apply(std::span<const double>(v), std::span<double>(y));
    if (rep.iterations >= 2) axpy(-beta / oldb, r1, y);
    const double alfa = dot(v, y);
    axpy(-alfa / beta, r2, y);
    r1 = r2;
    r2 = y;
    precond(std::span<const double>(r2), std::span<double>(y));
    oldb = beta;
    const double bb = dot(r2, y);
    beta = bb > 0.0 ? std::sqrt(bb) : 0.0;

    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    const double denom = 1.0 / gamma;
    w1.swap(w2);
    w2.swap(w);
    for (std::size_t i = 0; i < n; ++i) w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) * denom;
    axpy(phi, w, x);

    rep.relative_residual = std::abs(phibar) / beta1;
    if (rep.relative_residual <= opts.tol || beta == 0.0) break;
  }
  rep.converged = rep.relative_residual <= opts.tol || beta == 0.0;
  return rep;
}

}  // namespace kgm::linalg
