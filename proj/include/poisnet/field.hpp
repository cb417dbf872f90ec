#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisnet/parallel.hpp"

namespace poisnet {

enum class Geometry : std::uint8_t { cartesian = 0, axisymmetric = 1 };

// Uniform structured node-centered grid. For axisymmetric grids the y axis
// is the radius r with r = 0 at j = 0.
struct GridSpec {
  int nx = 0;
  int ny = 0;
  double Lx = 0.0;  // m
  double Ly = 0.0;  // m
  Geometry geometry = Geometry::cartesian;

  GridSpec() = default;
  GridSpec(int nx_, int ny_, double Lx_, double Ly_,
           Geometry geom = Geometry::cartesian)
      : nx(nx_), ny(ny_), Lx(Lx_), Ly(Ly_), geometry(geom) {
    if (nx < 3 || ny < 3) throw std::invalid_argument("GridSpec: need nx, ny >= 3");
    if (!(Lx > 0.0) || !(Ly > 0.0))
      throw std::invalid_argument("GridSpec: need positive domain lengths");
  }

  double dx() const { return Lx / (nx - 1); }
  double dy() const { return Ly / (ny - 1); }
  double x(int i) const { return i * dx(); }
  double y(int j) const { return j * dy(); }
  double r(int j) const { return y(j); }
  int size() const { return nx * ny; }
  int idx(int i, int j) const { return j * nx + i; }
  bool boundary(int i, int j) const {
    return i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
  }

  bool operator==(const GridSpec& o) const {
    return nx == o.nx && ny == o.ny && Lx == o.Lx && Ly == o.Ly &&
           geometry == o.geometry;
  }
};

// Node-centered scalar values, row-major (j outer, i inner).
struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0)
      : grid(g), values(static_cast<std::size_t>(g.size()), fill) {}

  double& operator()(int i, int j) { return values[grid.idx(i, j)]; }
  double operator()(int i, int j) const { return values[grid.idx(i, j)]; }

  ScalarField& operator+=(const ScalarField& o) {
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct VectorField {
  GridSpec grid;
  std::vector<double> x;  // component along x
  std::vector<double> y;  // component along y (r for axisymmetric)

  VectorField() = default;
  explicit VectorField(const GridSpec& g)
      : grid(g),
        x(static_cast<std::size_t>(g.size()), 0.0),
        y(static_cast<std::size_t>(g.size()), 0.0) {}
};

namespace detail {
inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Finite-difference operators
// ---------------------------------------------------------------------------

// Discrete 5-point Laplacian on interior nodes; boundary entries are 0 by
// convention and excluded from interior losses and norms.
inline ScalarField laplacian_cartesian(const ScalarField& phi) {
  const GridSpec& g = phi.grid;
  detail::require(g.geometry == Geometry::cartesian,
                  "laplacian_cartesian: cartesian grid required");
  detail::require(g.nx >= 3 && g.ny >= 3, "laplacian_cartesian: grid too small");
  ScalarField out(g);
  const double ax = 1.0 / (g.dx() * g.dx());
  const double ay = 1.0 / (g.dy() * g.dy());
  const double* p = phi.values.data();
  double* o = out.values.data();
  const int nx = g.nx;
  parallel_for(1, g.ny - 1, [&](std::ptrdiff_t j) {
    for (int i = 1; i < nx - 1; ++i) {
      const int k = static_cast<int>(j) * nx + i;
      o[k] = ax * (p[k - 1] - 2.0 * p[k] + p[k + 1]) +
             ay * (p[k - nx] - 2.0 * p[k] + p[k + nx]);
    }
  });
  return out;
}

// Axisymmetric Laplacian (1/r) d/dr(r dphi/dr) + d2phi/dx2 with the
// conservative face-radius stencil; the axis row r = 0 uses the regularized
// limit 4 (phi_1 - phi_0) / dr^2. Rows i = 0, i = nx-1 and j = ny-1 are
// boundary (0); the axis row j = 0 is computed.
inline ScalarField laplacian_axisymmetric(const ScalarField& phi) {
  const GridSpec& g = phi.grid;
  detail::require(g.geometry == Geometry::axisymmetric,
                  "laplacian_axisymmetric: axisymmetric grid required");
  ScalarField out(g);
  const double dr = g.dy();
  const double ax = 1.0 / (g.dx() * g.dx());
  const double ar = 1.0 / (dr * dr);
  const double* p = phi.values.data();
  double* o = out.values.data();
  const int nx = g.nx;
  // axis row
  for (int i = 1; i < nx - 1; ++i) {
    o[i] = 4.0 * ar * (p[nx + i] - p[i]) +
           ax * (p[i - 1] - 2.0 * p[i] + p[i + 1]);
  }
  parallel_for(1, g.ny - 1, [&](std::ptrdiff_t j) {
    const double r = g.r(static_cast<int>(j));
    const double rp = (r + 0.5 * dr) / r;  // face radii over node radius
    const double rm = (r - 0.5 * dr) / r;
    for (int i = 1; i < nx - 1; ++i) {
      const int k = static_cast<int>(j) * nx + i;
      o[k] = ar * (rp * (p[k + nx] - p[k]) - rm * (p[k] - p[k - nx])) +
             ax * (p[k - 1] - 2.0 * p[k] + p[k + 1]);
    }
  });
  return out;
}

inline ScalarField laplacian(const ScalarField& phi) {
  return phi.grid.geometry == Geometry::cartesian ? laplacian_cartesian(phi)
                                                  : laplacian_axisymmetric(phi);
}

// E = -grad(phi): central differences inside, second-order one-sided on the
// boundary (exact on linear fields).
inline VectorField gradient_to_efield(const ScalarField& phi) {
  const GridSpec& g = phi.grid;
  VectorField E(g);
  const double hx = 0.5 / g.dx();
  const double hy = 0.5 / g.dy();
  const int nx = g.nx, ny = g.ny;
  const double* p = phi.values.data();
  parallel_for(0, ny, [&](std::ptrdiff_t jj) {
    const int j = static_cast<int>(jj);
    for (int i = 0; i < nx; ++i) {
      const int k = j * nx + i;
      double dphidx, dphidy;
      if (i == 0)
        dphidx = hx * (-3.0 * p[k] + 4.0 * p[k + 1] - p[k + 2]);
      else if (i == nx - 1)
        dphidx = hx * (3.0 * p[k] - 4.0 * p[k - 1] + p[k - 2]);
      else
        dphidx = hx * (p[k + 1] - p[k - 1]);
      if (j == 0)
        dphidy = hy * (-3.0 * p[k] + 4.0 * p[k + nx] - p[k + 2 * nx]);
      else if (j == ny - 1)
        dphidy = hy * (3.0 * p[k] - 4.0 * p[k - nx] + p[k - 2 * nx]);
      else
        dphidy = hy * (p[k + nx] - p[k - nx]);
      E.x[k] = -dphidx;
      E.y[k] = -dphidy;
    }
  });
  return E;
}

// ---------------------------------------------------------------------------
// Norms (§5.1 metrics): mean absolute and maximum absolute difference.
// ---------------------------------------------------------------------------

inline double norm_1(const ScalarField& a, const ScalarField& b) {
  detail::require(a.values.size() == b.values.size(), "norm_1: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    s += std::abs(a.values[k] - b.values[k]);
  return s / static_cast<double>(a.values.size());
}

inline double norm_inf(const ScalarField& a, const ScalarField& b) {
  detail::require(a.values.size() == b.values.size(), "norm_inf: shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    m = std::max(m, std::abs(a.values[k] - b.values[k]));
  return m;
}

// For vector fields the index spans both components.
inline double norm_1(const VectorField& a, const VectorField& b) {
  detail::require(a.x.size() == b.x.size(), "norm_1: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.x.size(); ++k)
    s += std::abs(a.x[k] - b.x[k]) + std::abs(a.y[k] - b.y[k]);
  return s / static_cast<double>(2 * a.x.size());
}

inline double norm_inf(const VectorField& a, const VectorField& b) {
  detail::require(a.x.size() == b.x.size(), "norm_inf: shape mismatch");
  double m = 0.0;
  for (std::size_t k = 0; k < a.x.size(); ++k)
    m = std::max({m, std::abs(a.x[k] - b.x[k]), std::abs(a.y[k] - b.y[k])});
  return m;
}

// ---------------------------------------------------------------------------
// Mode projection, Eq.-style sine coefficient of a field:
//   A_nm = 4/(Lx Ly) * integral sin(n pi x/Lx) sin(m pi y/Ly) f dx dy
// evaluated with the 2D trapezoid rule.
// ---------------------------------------------------------------------------

inline double mode_amplitude(const ScalarField& f, int n, int m) {
  const GridSpec& g = f.grid;
  detail::require(g.geometry == Geometry::cartesian,
                  "mode_amplitude: cartesian grid required");
  detail::require(n >= 1 && m >= 1, "mode_amplitude: mode indices start at 1");
  const double kx = n * M_PI / g.Lx;
  const double ky = m * M_PI / g.Ly;
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    const double wy = (j == 0 || j == g.ny - 1) ? 0.5 : 1.0;
    const double sy = std::sin(ky * g.y(j));
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) {
      const double wx = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
      row += wx * std::sin(kx * g.x(i)) * f(i, j);
    }
    acc += wy * sy * row;
  }
  return 4.0 / (g.Lx * g.Ly) * acc * g.dx() * g.dy();
}

// ---------------------------------------------------------------------------
// Field I/O. Binary format: magic "PFLD1", little-endian u32 nx, u32 ny,
// f64 Lx, f64 Ly, u8 geometry, then nx*ny f64 values row-major.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "field I/O assumes a little-endian host");

inline void write_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_field: cannot open " + path);
  os.write("PFLD1", 5);
  const std::uint32_t nx = static_cast<std::uint32_t>(f.grid.nx);
  const std::uint32_t ny = static_cast<std::uint32_t>(f.grid.ny);
  os.write(reinterpret_cast<const char*>(&nx), 4);
  os.write(reinterpret_cast<const char*>(&ny), 4);
  os.write(reinterpret_cast<const char*>(&f.grid.Lx), 8);
  os.write(reinterpret_cast<const char*>(&f.grid.Ly), 8);
  const std::uint8_t geom = static_cast<std::uint8_t>(f.grid.geometry);
  os.write(reinterpret_cast<const char*>(&geom), 1);
  os.write(reinterpret_cast<const char*>(f.values.data()),
           static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write_field: write failed for " + path);
}

inline ScalarField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_field: cannot open " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "PFLD1", 5) != 0)
    throw std::runtime_error("read_field: bad magic in " + path);
  std::uint32_t nx = 0, ny = 0;
  double Lx = 0.0, Ly = 0.0;
  std::uint8_t geom = 0;
  is.read(reinterpret_cast<char*>(&nx), 4);
  is.read(reinterpret_cast<char*>(&ny), 4);
  is.read(reinterpret_cast<char*>(&Lx), 8);
  is.read(reinterpret_cast<char*>(&Ly), 8);
  is.read(reinterpret_cast<char*>(&geom), 1);
  if (!is || nx < 3 || ny < 3 || geom > 1)
    throw std::runtime_error("read_field: malformed header in " + path);
  ScalarField f(GridSpec(static_cast<int>(nx), static_cast<int>(ny), Lx, Ly,
                         static_cast<Geometry>(geom)));
  is.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (is.gcount() !=
      static_cast<std::streamsize>(f.values.size() * sizeof(double)))
    throw std::runtime_error("read_field: truncated payload in " + path);
  if (!f.finite())
    throw std::runtime_error("read_field: non-finite entries in " + path);
  return f;
}

inline void write_field_csv(const std::string& path, const ScalarField& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_field_csv: cannot open " + path);
  os << "i,j,x,y,value\n";
  os.precision(17);
  for (int j = 0; j < f.grid.ny; ++j)
    for (int i = 0; i < f.grid.nx; ++i)
      os << i << ',' << j << ',' << f.grid.x(i) << ',' << f.grid.y(j) << ','
         << f(i, j) << '\n';
}

}  // namespace poisnet
