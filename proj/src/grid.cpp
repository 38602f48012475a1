#include "kgm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "kgm/error.hpp"

namespace kgm {

const char* to_string(Space s) { return s == Space::Dirichlet ? "dirichlet" : "neumann"; }

std::shared_ptr<const Grid> Grid::build(int dim, std::span<const double> extent,
                                        std::span<const int> n) {
  if (dim != 2 && dim != 3) throw Error(ErrorCode::InvalidArgument, "grid dimension must be 2 or 3");
  if (extent.size() < static_cast<std::size_t>(dim) || n.size() < static_cast<std::size_t>(dim))
    throw Error(ErrorCode::InvalidArgument, "grid extent/n must have one entry per axis");

  auto g = std::shared_ptr<Grid>(new Grid());
  g->dim_ = dim;
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 3)
      throw Error(ErrorCode::InvalidArgument,
                  "grid needs at least 3 nodes per axis (axis " + std::to_string(a) + ")");
    if (!(extent[a] > 0.0) || !std::isfinite(extent[a]))
      throw Error(ErrorCode::InvalidArgument,
                  "grid extent must be positive (axis " + std::to_string(a) + ")");
    g->n_[a] = n[a];
    g->extent_[a] = extent[a];
    g->h_[a] = extent[a] / (n[a] - 1);
  }
  g->stride_ = {1, static_cast<std::size_t>(g->n_[0]),
                static_cast<std::size_t>(g->n_[0]) * static_cast<std::size_t>(g->n_[1])};

  const std::size_t total =
      static_cast<std::size_t>(g->n_[0]) * static_cast<std::size_t>(g->n_[1]) * g->n_[2];
  g->weights_.resize(total);
  g->boundary_mask_.assign(total, 0);
  for (std::size_t i = 0; i < total; ++i) {
    const auto ijk = g->coords(i);
    double w = 1.0;
    bool boundary = false;
    for (int a = 0; a < dim; ++a) {
      w *= g->axis_weight(a, ijk[a]);
      if (ijk[a] == 0 || ijk[a] == g->n_[a] - 1) boundary = true;
    }
    g->weights_[i] = w;
    g->boundary_mask_[i] = boundary ? 1 : 0;
    (boundary ? g->boundary_nodes_ : g->interior_nodes_).push_back(i);
  }

  for (int a = 0; a < dim; ++a) {
    for (int side = 0; side < 2; ++side) {
      const int fixed = side == 0 ? 0 : g->n_[a] - 1;
      for (std::size_t i = 0; i < total; ++i) {
        const auto ijk = g->coords(i);
        if (ijk[a] != fixed) continue;
        double w = 1.0;
        for (int b = 0; b < dim; ++b)
          if (b != a) w *= g->axis_weight(b, ijk[b]);
        g->slots_.push_back({i, 2 * a + side, w});
      }
    }
  }

  g->volume_ = 1.0;
  for (int a = 0; a < dim; ++a) g->volume_ *= extent[a];
  g->surface_ = 0.0;
  for (int a = 0; a < dim; ++a) {
    double face = 1.0;
    for (int b = 0; b < dim; ++b)
      if (b != a) face *= extent[b];
    g->surface_ += 2.0 * face;
  }
  return g;
}

std::array<int, 3> Grid::coords(std::size_t node) const {
  const int i0 = static_cast<int>(node % n_[0]);
  const std::size_t rest = node / n_[0];
  const int i1 = static_cast<int>(rest % n_[1]);
  const int i2 = static_cast<int>(rest / n_[1]);
  return {i0, i1, i2};
}

std::size_t Grid::index(const std::array<int, 3>& ijk) const {
  return ijk[0] + stride_[1] * ijk[1] + stride_[2] * ijk[2];
}

std::array<double, 3> Grid::position(std::size_t node) const {
  const auto ijk = coords(node);
  std::array<double, 3> x{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) x[a] = ijk[a] * h_[a];
  return x;
}

double Grid::axis_weight(int axis, int i) const {
  if (axis >= dim_) return 1.0;
  return (i == 0 || i == n_[axis] - 1) ? 0.5 * h_[axis] : h_[axis];
}

bool Grid::same_shape(const Grid& other) const {
  if (dim_ != other.dim_) return false;
  for (int a = 0; a < dim_; ++a)
    if (n_[a] != other.n_[a] || extent_[a] != other.extent_[a]) return false;
  return true;
}

ScalarField::ScalarField(GridPtr g, Space s) : grid(std::move(g)), space(s) {
  values.assign(grid->size(), 0.0);
}

ScalarField::ScalarField(GridPtr g, Space s, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)), space(s) {
  if (values.size() != grid->size())
    throw Error(ErrorCode::InvalidArgument, "field size does not match the grid");
  enforce_space();
}

void ScalarField::enforce_space() {
  if (space != Space::Dirichlet) return;
  for (std::size_t b : grid->boundary_nodes()) values[b] = 0.0;
}

namespace {

void check_compatible(const ScalarField& a, const ScalarField& b) {
  if (a.grid != b.grid && !a.grid->same_shape(*b.grid))
    throw Error(ErrorCode::InvalidArgument, "fields live on different grids");
}

Space combined_space(const ScalarField& a, const ScalarField& b) {
  return (a.space == Space::Dirichlet && b.space == Space::Dirichlet) ? Space::Dirichlet
                                                                        : Space::Neumann;
}

}  // namespace

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  check_compatible(a, b);
  ScalarField r(a.grid, combined_space(a, b));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  check_compatible(a, b);
  ScalarField r(a.grid, combined_space(a, b));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

ScalarField operator*(double t, const ScalarField& a) {
  ScalarField r(a.grid, a.space);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = t * a[i];
  return r;
}

ScalarField operator-(const ScalarField& a) { return -1.0 * a; }

ScalarField pointwise(const ScalarField& a, const ScalarField& b) {
  check_compatible(a, b);
  ScalarField r(a.grid, combined_space(a, b));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] * b[i];
  return r;
}

BoundaryField::BoundaryField(GridPtr g) : grid(std::move(g)) {
  values.assign(grid->slots().size(), 0.0);
}

BoundaryField::BoundaryField(GridPtr g, std::vector<double> v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid->slots().size())
    throw Error(ErrorCode::InvalidArgument, "boundary field size does not match the grid");
}

BoundaryField operator*(double t, const BoundaryField& a) {
  BoundaryField r(a.grid);
  for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = t * a.values[i];
  return r;
}

double integrate(const ScalarField& f) {
  const auto w = f.grid->weights();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i];
  return s;
}

double mean(const ScalarField& f) { return integrate(f) / f.grid->volume(); }

double boundary_integral(const BoundaryField& a) {
  const auto slots = a.grid->slots();
  double s = 0.0;
  for (std::size_t k = 0; k < slots.size(); ++k) s += slots[k].weight * a.values[k];
  return s;
}

double gradient_energy(const ScalarField& f) {
  const Grid& g = *f.grid;
  const auto w = g.weights();
  double e = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto ijk = g.coords(i);
    for (int a = 0; a < g.dim(); ++a) {
      if (ijk[a] == g.n(a) - 1) continue;
      const double transverse = w[i] / g.axis_weight(a, ijk[a]);
      const double h = g.spacing(a);
      const double d = (f[i + g.stride(a)] - f[i]) / h;
      e += transverse * h * d * d;
    }
  }
  return e;
}

double lp_norm(const ScalarField& f, double p) {
  const auto w = f.grid->weights();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::pow(std::abs(f[i]), p);
  return std::pow(s, 1.0 / p);
}

double norm(const ScalarField& f, NormKind kind) {
  switch (kind) {
    case NormKind::L2: {
      const auto w = f.grid->weights();
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i] * f[i];
      return std::sqrt(s);
    }
    case NormKind::L3: return lp_norm(f, 3.0);
    case NormKind::L6: return lp_norm(f, 6.0);
    case NormKind::Linf: {
      double m = 0.0;
      for (double v : f.values) m = std::max(m, std::abs(v));
      return m;
    }
    case NormKind::H10:
      if (f.space != Space::Dirichlet)
        throw Error(ErrorCode::SpaceMismatch, "H10 norm requested on a Neumann field");
      return std::sqrt(gradient_energy(f));
    case NormKind::H1: {
      const double m = mean(f);
      return std::sqrt(gradient_energy(f) + m * m);
    }
  }
  return 0.0;
}

double boundary_l2_norm(const BoundaryField& a) {
  const auto slots = a.grid->slots();
  double s = 0.0;
  for (std::size_t k = 0; k < slots.size(); ++k) s += slots[k].weight * a.values[k] * a.values[k];
  return std::sqrt(s);
}

double h_half_norm(const BoundaryField& a) {
  const Grid& g = *a.grid;
  const auto slots = g.slots();
  const double l2 = boundary_l2_norm(a);
  // Gagliardo seminorm with kernel |x-y|^-(d-1+1); pairs at the same physical
  // point (a node shared by two faces) are excluded like the diagonal.
  std::vector<std::array<double, 3>> pos(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) pos[k] = g.position(slots[k].node);
  const int d = g.dim();
  double semi = 0.0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    double row = 0.0;
    for (std::size_t t = s + 1; t < slots.size(); ++t) {
      const double diff = a.values[s] - a.values[t];
      if (diff == 0.0) continue;
      double r2 = 0.0;
      for (int ax = 0; ax < d; ++ax) {
        const double dx = pos[s][ax] - pos[t][ax];
        r2 += dx * dx;
      }
      if (r2 == 0.0) continue;
      const double r = std::sqrt(r2);
      row += diff * diff / std::pow(r, d) * slots[t].weight;
    }
    semi += 2.0 * row * slots[s].weight;
  }
  return std::sqrt(l2 * l2 + semi);
}

namespace {

void write_header(std::ostream& os, const Grid& g, const char* tag, std::size_t count) {
  os << "kgm-field 1\n";
  os << "dim " << g.dim() << "\n";
  os << "n";
  for (int a = 0; a < g.dim(); ++a) os << ' ' << g.n(a);
  os << "\nextent";
  os << std::setprecision(17);
  for (int a = 0; a < g.dim(); ++a) os << ' ' << g.extent(a);
  os << "\nspace " << tag << "\ncount " << count << "\n";
}

void write_values(std::ostream& os, std::span<const double> v) {
  os << std::setprecision(17);
  for (double x : v) os << x << '\n';
}

struct Header {
  int dim = 0;
  std::vector<int> n;
  std::vector<double> extent;
  std::string space;
  std::size_t count = 0;
};

Header read_header(std::istream& is) {
  Header h;
  std::string line;
  auto next = [&](const char* key) {
    if (!std::getline(is, line)) throw Error(ErrorCode::Io, std::string("field dump truncated before '") + key + "'");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw Error(ErrorCode::Io, std::string("field dump: expected '") + key + "', got '" + k + "'");
    return ls;
  };
  {
    auto ls = next("kgm-field");
    int version = 0;
    ls >> version;
    if (version != 1) throw Error(ErrorCode::Io, "field dump: unsupported version");
  }
  next("dim") >> h.dim;
  {
    auto ls = next("n");
    int v;
    while (ls >> v) h.n.push_back(v);
  }
  {
    auto ls = next("extent");
    double v;
    while (ls >> v) h.extent.push_back(v);
  }
  next("space") >> h.space;
  next("count") >> h.count;
  return h;
}

void check_header(const Header& h, const Grid& g) {
  bool ok = h.dim == g.dim() && static_cast<int>(h.n.size()) == g.dim() &&
            static_cast<int>(h.extent.size()) == g.dim();
  for (int a = 0; ok && a < g.dim(); ++a)
    ok = h.n[a] == g.n(a) && std::abs(h.extent[a] - g.extent(a)) <= 1e-12 * g.extent(a);
  if (!ok) throw Error(ErrorCode::Io, "field dump grid does not match the configured grid");
}

std::vector<double> read_values(std::istream& is, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i)
    if (!(is >> v[i])) throw Error(ErrorCode::Io, "field dump truncated");
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return is;
}

}  // namespace

void write_field(std::ostream& os, const ScalarField& f) {
  write_header(os, *f.grid, to_string(f.space), f.size());
  write_values(os, f.values);
}

void write_field(std::ostream& os, const BoundaryField& a) {
  write_header(os, *a.grid, "boundary", a.size());
  write_values(os, a.values);
}

void save_field(const std::string& path, const ScalarField& f) {
  auto os = open_out(path);
  write_field(os, f);
}

void save_field(const std::string& path, const BoundaryField& a) {
  auto os = open_out(path);
  write_field(os, a);
}

ScalarField read_scalar_field(std::istream& is, const GridPtr& grid) {
  const Header h = read_header(is);
  check_header(h, *grid);
  Space s;
  if (h.space == "dirichlet") s = Space::Dirichlet;
  else if (h.space == "neumann") s = Space::Neumann;
  else throw Error(ErrorCode::Io, "field dump: '" + h.space + "' is not a nodal field");
  if (h.count != grid->size()) throw Error(ErrorCode::Io, "field dump: wrong value count");
  ScalarField f(grid, s, read_values(is, h.count));
  return f;
}

ScalarField load_scalar_field(const std::string& path, const GridPtr& grid) {
  auto is = open_in(path);
  return read_scalar_field(is, grid);
}

BoundaryField read_boundary_field(std::istream& is, const GridPtr& grid) {
  const Header h = read_header(is);
  check_header(h, *grid);
  if (h.space != "boundary") throw Error(ErrorCode::Io, "field dump is not a boundary field");
  if (h.count != grid->slots().size()) throw Error(ErrorCode::Io, "field dump: wrong value count");
  return BoundaryField(grid, read_values(is, h.count));
}

BoundaryField load_boundary_field(const std::string& path, const GridPtr& grid) {
  auto is = open_in(path);
  return read_boundary_field(is, grid);
}

}  // namespace kgm
