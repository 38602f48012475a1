#pragma once

// Uniform box discretization, nodal fields, lumped quadrature and norms.
//
// Nodes are stored in lexicographic order with axis 0 varying fastest:
//   index = i0 + n0 * (i1 + n1 * i2).
// Volume weights are tensor-product trapezoidal weights, so every summed
// identity of the form  1^T K = 0  is exact to round-off.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kgm {

enum class Space { Dirichlet, Neumann };

const char* to_string(Space s);

// One quadrature sample of the boundary: a node seen from one face. Nodes on
// box edges and corners appear once per face they belong to, so a face
// indicator carries exactly the flux of its face.
struct BoundarySlot {
  std::size_t node;
  int face;  // 2 * axis + side, side 0 = lower face, 1 = upper face
  double weight;
};

class Grid {
 public:
  static std::shared_ptr<const Grid> build(int dim, std::span<const double> extent,
                                           std::span<const int> n);

  int dim() const { return dim_; }
  int n(int axis) const { return n_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  double spacing(int axis) const { return h_[axis]; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  std::size_t size() const { return weights_.size(); }

  std::array<int, 3> coords(std::size_t node) const;
  std::size_t index(const std::array<int, 3>& ijk) const;
  std::array<double, 3> position(std::size_t node) const;

  // 1-D trapezoidal weight of node i along one axis.
  double axis_weight(int axis, int i) const;

  bool is_boundary(std::size_t node) const { return boundary_mask_[node] != 0; }
  std::span<const double> weights() const { return weights_; }
  std::span<const std::size_t> boundary_nodes() const { return boundary_nodes_; }
  std::span<const std::size_t> interior_nodes() const { return interior_nodes_; }
  std::span<const BoundarySlot> slots() const { return slots_; }

  double volume() const { return volume_; }
  double surface() const { return surface_; }

  bool same_shape(const Grid& other) const;

 private:
  Grid() = default;

  int dim_ = 3;
  std::array<int, 3> n_{1, 1, 1};
  std::array<double, 3> extent_{1.0, 1.0, 1.0};
  std::array<double, 3> h_{1.0, 1.0, 1.0};
  std::array<std::size_t, 3> stride_{1, 1, 1};
  std::vector<double> weights_;
  std::vector<char> boundary_mask_;
  std::vector<std::size_t> boundary_nodes_;
  std::vector<std::size_t> interior_nodes_;
  std::vector<BoundarySlot> slots_;
  double volume_ = 0.0;
  double surface_ = 0.0;
};

using GridPtr = std::shared_ptr<const Grid>;

// Nodal values on every grid node. Dirichlet fields vanish on boundary nodes.
struct ScalarField {
  GridPtr grid;
  std::vector<double> values;
  Space space = Space::Neumann;

  ScalarField() = default;
  ScalarField(GridPtr g, Space s);
  ScalarField(GridPtr g, Space s, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  // Zeroes boundary values when the field is Dirichlet.
  void enforce_space();
};

ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(double t, const ScalarField& a);
ScalarField operator-(const ScalarField& a);
// Pointwise product; the result lives in the Neumann space unless both are Dirichlet.
ScalarField pointwise(const ScalarField& a, const ScalarField& b);

// One value per boundary slot (see BoundarySlot).
struct BoundaryField {
  GridPtr grid;
  std::vector<double> values;

  BoundaryField() = default;
  explicit BoundaryField(GridPtr g);
  BoundaryField(GridPtr g, std::vector<double> v);

  std::size_t size() const { return values.size(); }
};

BoundaryField operator*(double t, const BoundaryField& a);

enum class NormKind { L2, L3, L6, Linf, H10, H1 };

double integrate(const ScalarField& f);
double mean(const ScalarField& f);
double boundary_integral(const BoundaryField& a);

// Squared discrete gradient norm: forward differences along every grid edge,
// weighted by the edge's dual-cell volume. Equals f^T K f for the stiffness K.
double gradient_energy(const ScalarField& f);

double lp_norm(const ScalarField& f, double p);
double norm(const ScalarField& f, NormKind kind);
double h_half_norm(const BoundaryField& a);
double boundary_l2_norm(const BoundaryField& a);

// Field dump: header lines (format tag, dim, n, extent, space) followed by one
// value per line.
void write_field(std::ostream& os, const ScalarField& f);
void write_field(std::ostream& os, const BoundaryField& a);
void save_field(const std::string& path, const ScalarField& f);
void save_field(const std::string& path, const BoundaryField& a);
ScalarField read_scalar_field(std::istream& is, const GridPtr& grid);
ScalarField load_scalar_field(const std::string& path, const GridPtr& grid);
BoundaryField read_boundary_field(std::istream& is, const GridPtr& grid);
BoundaryField load_boundary_field(const std::string& path, const GridPtr& grid);

}  // namespace kgm
