#pragma once

// Built-in field generators for coupling coefficients, boundary data, seeds
// and random probes.

#include <array>
#include <random>

#include "kgm/grid.hpp"

namespace kgm::gen {

ScalarField constant(const GridPtr& grid, double value, Space space = Space::Neumann);

ScalarField gaussian_bump(const GridPtr& grid, const std::array<double, 3>& center, double width,
                          double amplitude, Space space = Space::Neumann);

// `value` on the open half {x_axis < L/2} (upper = false) or {x_axis > L/2}; zero elsewhere.
ScalarField half_indicator(const GridPtr& grid, int axis, bool upper, double value,
                           Space space = Space::Neumann);

// Product of sines  Π_a sin(k_a π x_a / L_a); an exact eigenvector of the
// discrete Dirichlet Laplacian.
ScalarField dirichlet_mode(const GridPtr& grid, const std::array<int, 3>& k);

// Random smooth-plus-rough Dirichlet field: a few low sine modes with normal
// amplitudes plus nodal noise of relative size `roughness`.
ScalarField random_dirichlet(const GridPtr& grid, std::mt19937_64& rng, double roughness = 0.1);

// Nodal standard-normal noise in the given space.
ScalarField random_nodal(const GridPtr& grid, std::mt19937_64& rng, Space space);

BoundaryField boundary_constant(const GridPtr& grid, double value);
BoundaryField face_indicator(const GridPtr& grid, int face, double value = 1.0);
// +value on the upper face of `axis`, -value on the lower face; zero total flux.
BoundaryField face_dipole(const GridPtr& grid, int axis, double value = 1.0);
BoundaryField random_boundary(const GridPtr& grid, std::mt19937_64& rng);

// Face id from a name such as "x0+", "x1-", "x2+" (axis index, side).
int parse_face(const std::string& name, int dim);

}  // namespace kgm::gen
