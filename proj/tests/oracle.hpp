#pragma once

// Dense reference assembly with Eigen, built from the grid geometry alone.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "kgm/grid.hpp"

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

inline Vec weights(const kgm::Grid& g) {
  Vec w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ijk = g.coords(i);
    double p = 1.0;
    for (int a = 0; a < g.dim(); ++a) {
      const int n = g.n(a);
      p *= (ijk[a] == 0 || ijk[a] == n - 1) ? 0.5 * g.spacing(a) : g.spacing(a);
    }
    w[i] = p;
  }
  return w;
}

// Edge stiffness: Σ over axis-a edges of (Π_{b≠a} transverse weight / h_a)(f_i - f_j)².
inline Mat stiffness(const kgm::Grid& g) {
  const std::size_t n = g.size();
  Mat K = Mat::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ijk = g.coords(i);
    for (int a = 0; a < g.dim(); ++a) {
      if (ijk[a] == g.n(a) - 1) continue;
      auto nb = ijk;
      nb[a] += 1;
      const std::size_t j = g.index(nb);
      double c = 1.0 / g.spacing(a);
      for (int b = 0; b < g.dim(); ++b) {
        if (b == a) continue;
        c *= (ijk[b] == 0 || ijk[b] == g.n(b) - 1) ? 0.5 * g.spacing(b) : g.spacing(b);
      }
      K(i, i) += c;
      K(j, j) += c;
      K(i, j) -= c;
      K(j, i) -= c;
    }
  }
  return K;
}

// (K + W b²)⁻¹ W ρ
inline Vec screened_solve(const kgm::Grid& g, const Vec& b, const Vec& rho) {
  const Vec w = weights(g);
  Mat A = stiffness(g);
  for (Eigen::Index i = 0; i < A.rows(); ++i) A(i, i) += w[i] * b[i] * b[i];
  return A.partialPivLu().solve(w.cwiseProduct(rho));
}

// Neumann flux problem solved densely with a bordered (Lagrange multiplier) system.
inline Vec chi(const kgm::Grid& g, const Vec& boundary_dual, double flux) {
  const Vec w = weights(g);
  const Eigen::Index n = g.size();
  Mat B = Mat::Zero(n + 1, n + 1);
  B.topLeftCorner(n, n) = stiffness(g);
  B.block(0, n, n, 1) = w;
  B.block(n, 0, 1, n) = w.transpose();
  Vec rhs = Vec::Zero(n + 1);
  rhs.head(n) = boundary_dual - (flux / w.sum()) * w;
  return B.partialPivLu().solve(rhs).head(n);
}

// Dirichlet Riesz map: interior block of K solved against the dual vector.
inline Vec riesz_dirichlet(const kgm::Grid& g, const Vec& dual) {
  const auto interior = g.interior_nodes();
  const Mat K = stiffness(g);
  const Eigen::Index m = interior.size();
  Mat Ki(m, m);
  Vec r(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    r[a] = dual[interior[a]];
    for (Eigen::Index b = 0; b < m; ++b) Ki(a, b) = K(interior[a], interior[b]);
  }
  const Vec x = Ki.llt().solve(r);
  Vec out = Vec::Zero(g.size());
  for (Eigen::Index a = 0; a < m; ++a) out[interior[a]] = x[a];
  return out;
}

inline double lp(const Vec& w, const Vec& f, double p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) s += w[i] * std::pow(std::abs(f[i]), p);
  return std::pow(s, 1.0 / p);
}

inline kgm::GridPtr cube(int n, int dim = 3) {
  const double e[3] = {1.0, 1.0, 1.0};
  const int nn[3] = {n, n, n};
  return kgm::Grid::build(dim, std::span<const double>(e, dim), std::span<const int>(nn, dim));
}

}  // namespace oracle
