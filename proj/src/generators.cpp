#include "kgm/generators.hpp"

#include <cmath>
#include <numbers>

#include "kgm/error.hpp"

namespace kgm::gen {

ScalarField constant(const GridPtr& grid, double value, Space space) {
  ScalarField f(grid, space, std::vector<double>(grid->size(), value));
  return f;
}

ScalarField gaussian_bump(const GridPtr& grid, const std::array<double, 3>& center, double width,
                          double amplitude, Space space) {
  if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "gaussian width must be positive");
  ScalarField f(grid, space);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const auto x = grid->position(i);
    double r2 = 0.0;
    for (int a = 0; a < grid->dim(); ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
    f[i] = amplitude * std::exp(-r2 / (2.0 * width * width));
  }
  f.enforce_space();
  return f;
}

ScalarField half_indicator(const GridPtr& grid, int axis, bool upper, double value, Space space) {
  if (axis < 0 || axis >= grid->dim()) throw Error(ErrorCode::InvalidArgument, "half indicator: bad axis");
  ScalarField f(grid, space);
  const double mid = 0.5 * grid->extent(axis);
  const double eps = 1e-9 * grid->spacing(axis);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double x = grid->position(i)[axis];
    const bool inside = upper ? x > mid + eps : x < mid - eps;
    f[i] = inside ? value : 0.0;
  }
  f.enforce_space();
  return f;
}

ScalarField dirichlet_mode(const GridPtr& grid, const std::array<int, 3>& k) {
  ScalarField f(grid, Space::Dirichlet);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const auto x = grid->position(i);
    double v = 1.0;
    for (int a = 0; a < grid->dim(); ++a)
      v *= std::sin(k[a] * std::numbers::pi * x[a] / grid->extent(a));
    f[i] = v;
  }
  f.enforce_space();
  return f;
}

ScalarField random_dirichlet(const GridPtr& grid, std::mt19937_64& rng, double roughness) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ScalarField f(grid, Space::Dirichlet);
  const int kmax = 3;
  const int kz = grid->dim() == 3 ? kmax : 1;
  for (int k0 = 1; k0 <= kmax; ++k0)
    for (int k1 = 1; k1 <= kmax; ++k1)
      for (int k2 = 1; k2 <= kz; ++k2) {
        const double amp = normal(rng) / (k0 * k0 + k1 * k1 + k2 * k2);
        const auto mode = dirichlet_mode(grid, {k0, k1, k2});
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += amp * mode[i];
      }
  double scale = 0.0;
  for (double v : f.values) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += roughness * scale * normal(rng);
  f.enforce_space();
  return f;
}

ScalarField random_nodal(const GridPtr& grid, std::mt19937_64& rng, Space space) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ScalarField f(grid, space);
  for (double& v : f.values) v = normal(rng);
  f.enforce_space();
  return f;
}

BoundaryField boundary_constant(const GridPtr& grid, double value) {
  return BoundaryField(grid, std::vector<double>(grid->slots().size(), value));
}

BoundaryField face_indicator(const GridPtr& grid, int face, double value) {
  if (face < 0 || face >= 2 * grid->dim()) throw Error(ErrorCode::InvalidArgument, "face index out of range");
  BoundaryField a(grid);
  const auto slots = grid->slots();
  for (std::size_t k = 0; k < slots.size(); ++k)
    if (slots[k].face == face) a.values[k] = value;
  return a;
}

BoundaryField face_dipole(const GridPtr& grid, int axis, double value) {
  if (axis < 0 || axis >= grid->dim()) throw Error(ErrorCode::InvalidArgument, "dipole: bad axis");
  BoundaryField a(grid);
  const auto slots = grid->slots();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k].face == 2 * axis + 1) a.values[k] = value;
    if (slots[k].face == 2 * axis) a.values[k] = -value;
  }
  return a;
}

BoundaryField random_boundary(const GridPtr& grid, std::mt19937_64& rng) {
  // Smooth random data: an affine-plus-quadratic function of position with
  // normal coefficients, sampled on every slot.
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 3> lin{}, quad{};
  const double c0 = normal(rng);
  for (int a = 0; a < 3; ++a) {
    lin[a] = normal(rng);
    quad[a] = normal(rng);
  }
  BoundaryField f(grid);
  const auto slots = grid->slots();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto x = grid->position(slots[k].node);
    double v = c0;
    for (int a = 0; a < grid->dim(); ++a) {
      const double s = x[a] / grid->extent(a) - 0.5;
      v += lin[a] * s + quad[a] * s * s;
    }
    f.values[k] = v;
  }
  return f;
}

int parse_face(const std::string& name, int dim) {
  // "x<axis><+|->"
  if (name.size() != 3 || name[0] != 'x' || (name[2] != '+' && name[2] != '-'))
    throw Error(ErrorCode::Config, "face name must look like x0+ or x2-: '" + name + "'");
  const int axis = name[1] - '0';
  if (axis < 0 || axis >= dim) throw Error(ErrorCode::Config, "face axis out of range: '" + name + "'");
  return 2 * axis + (name[2] == '+' ? 1 : 0);
}

}  // namespace kgm::gen
