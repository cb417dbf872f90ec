/// Field containers, stencils, norms, projections and I/O.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "poisnet/analytic.hpp"
#include "poisnet/field.hpp"
#include "poisnet/rng.hpp"

using namespace poisnet;

namespace {

ScalarField fill(const GridSpec& g, double (*f)(double, double)) {
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out(i, j) = f(g.x(i), g.y(j));
  return out;
}

double interior_max_abs(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (int j = 1; j < a.grid.ny - 1; ++j)
    for (int i = 1; i < a.grid.nx - 1; ++i)
      m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace

TEST_CASE("cartesian laplacian of constant and bilinear fields is zero") {
  GridSpec g(17, 13, 1.0, 0.7);
  ScalarField c(g, 3.25);
  ScalarField lap = laplacian_cartesian(c);
  for (double v : lap.values) CHECK(v == 0.0);

  ScalarField xy = fill(g, [](double x, double y) { return x * y; });
  lap = laplacian_cartesian(xy);
  CHECK(interior_max_abs(lap, ScalarField(g)) < 1e-10);
}

TEST_CASE("cartesian laplacian matches analytic second derivative at O(dx^2)") {
  auto run = [](int n) {
    GridSpec g(n, n, 1.0, 1.0);
    ScalarField phi = mode_field(1, 1, 1.0, g);
    ScalarField lap = laplacian_cartesian(phi);
    double err = 0.0;
    for (int j = 1; j < g.ny - 1; ++j)
      for (int i = 1; i < g.nx - 1; ++i) {
        const double exact = -2.0 * M_PI * M_PI * phi(i, j);
        err = std::max(err, std::abs(lap(i, j) - exact));
      }
    return err;
  };
  const double coarse = run(101);
  const double fine = run(201);
  CHECK(coarse < 2.0 * M_PI * M_PI * 1e-3);
  const double ratio = coarse / fine;
  CHECK(ratio > 3.4);
  CHECK(ratio < 4.6);
}

TEST_CASE("laplacian is linear in its argument") {
  GridSpec g(21, 19, 0.02, 0.015);
  Rng rng(42);
  ScalarField f1(g), f2(g);
  for (auto& v : f1.values) v = rng.uniform(-1.0, 1.0);
  for (auto& v : f2.values) v = rng.uniform(-1.0, 1.0);
  const double a = rng.uniform(-3.0, 3.0), b = rng.uniform(-3.0, 3.0);
  ScalarField combo(g);
  for (int k = 0; k < g.size(); ++k)
    combo.values[k] = a * f1.values[k] + b * f2.values[k];
  ScalarField left = laplacian_cartesian(combo);
  ScalarField l1 = laplacian_cartesian(f1);
  ScalarField l2 = laplacian_cartesian(f2);
  double scale = left.max_abs();
  for (int k = 0; k < g.size(); ++k)
    CHECK(std::abs(left.values[k] - (a * l1.values[k] + b * l2.values[k])) <
          1e-12 * scale);
}

TEST_CASE("axisymmetric laplacian: constant, r^2 and linear axial profiles") {
  GridSpec g(19, 17, 2.0e-3, 1.0e-3, Geometry::axisymmetric);
  ScalarField c(g, -7.0);
  for (double v : laplacian_axisymmetric(c).values) CHECK(v == 0.0);

  // phi = r^2 has axisymmetric laplacian 4 everywhere, including the axis.
  ScalarField r2(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) r2(i, j) = g.r(j) * g.r(j);
  ScalarField lap = laplacian_axisymmetric(r2);
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 1; i < g.nx - 1; ++i)
      CHECK(lap(i, j) == Catch::Approx(4.0).margin(1e-8));

  ScalarField lin = fill(g, [](double x, double) { return x; });
  lap = laplacian_axisymmetric(lin);
  for (double v : lap.values) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("axisymmetric discrete flux identity") {
  // Volume-weighted radial terms telescope: with zero discrete flux at the
  // outer radius the weighted laplacian sum reduces to the axial part.
  GridSpec g(15, 12, 1.0e-3, 0.5e-3, Geometry::axisymmetric);
  Rng rng(7);
  ScalarField phi(g);
  for (auto& v : phi.values) v = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < g.nx; ++i) phi(i, g.ny - 1) = phi(i, g.ny - 2);

  const double dr = g.dy();
  const double ax = 1.0 / (g.dx() * g.dx());
  ScalarField lap = laplacian_axisymmetric(phi);
  for (int i = 1; i < g.nx - 1; ++i) {
    double weighted = 0.0, axial = 0.0;
    for (int j = 0; j < g.ny - 1; ++j) {
      const double w = (j == 0) ? dr * dr / 8.0 : g.r(j) * dr;
      weighted += w * lap(i, j);
      axial += w * ax * (phi(i - 1, j) - 2.0 * phi(i, j) + phi(i + 1, j));
    }
    // remaining radial flux at the last computed face r_{ny-3/2}
    const double face = (g.r(g.ny - 2) + 0.5 * dr) *
                        (phi(i, g.ny - 1) - phi(i, g.ny - 2)) / dr;
    CHECK(weighted - axial - face ==
          Catch::Approx(0.0).margin(1e-9 * (std::abs(weighted) + 1.0)));
  }
}

TEST_CASE("gradient_to_efield is exact on linear potentials") {
  GridSpec g(11, 9, 0.01, 0.01);
  const double E0 = 4.8e6;
  ScalarField phi(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) phi(i, j) = -E0 * g.x(i);
  VectorField E = gradient_to_efield(phi);
  for (int k = 0; k < g.size(); ++k) {
    CHECK(E.x[k] == Catch::Approx(E0).epsilon(1e-12));
    CHECK(std::abs(E.y[k]) < 1e-6);
  }

  ScalarField zero(g);
  VectorField Ez = gradient_to_efield(zero);
  for (int k = 0; k < g.size(); ++k) {
    CHECK(Ez.x[k] == 0.0);
    CHECK(Ez.y[k] == 0.0);
  }
}

TEST_CASE("gradient_to_efield second-order on smooth fields") {
  auto run = [](int n) {
    GridSpec g(n, n, 1.0, 1.0);
    ScalarField phi = mode_field(1, 1, 1.0, g);
    VectorField E = gradient_to_efield(phi);
    double err = 0.0;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double exact =
            -M_PI * std::cos(M_PI * g.x(i)) * std::sin(M_PI * g.y(j));
        err = std::max(err, std::abs(E.x[g.idx(i, j)] - exact));
      }
    return err;
  };
  const double ratio = run(51) / run(101);
  CHECK(ratio > 3.4);
  CHECK(ratio < 4.6);
}

TEST_CASE("norms: trivial values and independent-oracle check") {
  GridSpec g(5, 5, 1.0, 1.0);
  Rng rng(3);
  ScalarField a(g), b(g);
  for (auto& v : a.values) v = rng.uniform(-2.0, 2.0);
  b = a;
  CHECK(norm_1(a, b) == 0.0);
  CHECK(norm_inf(a, b) == 0.0);

  for (auto& v : b.values) v += 0.75;
  CHECK(norm_1(a, b) == Catch::Approx(0.75));
  CHECK(norm_inf(a, b) == Catch::Approx(0.75));

  for (auto& v : b.values) v = rng.uniform(-2.0, 2.0);
  double s = 0.0, m = 0.0;
  for (int k = 0; k < g.size(); ++k) {
    s += std::abs(a.values[k] - b.values[k]);
    m = std::max(m, std::abs(a.values[k] - b.values[k]));
  }
  CHECK(norm_1(a, b) == Catch::Approx(s / g.size()));
  CHECK(norm_inf(a, b) == Catch::Approx(m));
  CHECK(norm_inf(a, b) >= norm_1(a, b));
}

TEST_CASE("vector norms span both components") {
  GridSpec g(6, 4, 1.0, 1.0);
  VectorField a(g), b(g);
  a.x[5] = 2.0;
  a.y[11] = -3.0;
  CHECK(norm_inf(a, b) == Catch::Approx(3.0));
  CHECK(norm_1(a, b) == Catch::Approx(5.0 / (2.0 * g.size())));
}

TEST_CASE("mode_amplitude projects sine modes orthogonally") {
  GridSpec g(101, 101, 1.0, 1.0);
  ScalarField f = mode_field(1, 1, 1.0, g);
  CHECK(mode_amplitude(f, 1, 1) == Catch::Approx(1.0).margin(2e-4));
  CHECK(std::abs(mode_amplitude(f, 2, 2)) < 1e-10);
  ScalarField zero(g);
  CHECK(mode_amplitude(zero, 3, 4) == 0.0);
  CHECK_THROWS(mode_amplitude(f, 0, 1));
}

TEST_CASE("field binary round trip is bit exact") {
  GridSpec g(9, 7, 0.01, 0.02, Geometry::axisymmetric);
  Rng rng(11);
  ScalarField f(g);
  for (auto& v : f.values) v = rng.uniform(-1e8, 1e8);
  const std::string path = "roundtrip.pfld";
  write_field(path, f);
  ScalarField back = read_field(path);
  REQUIRE(back.grid == g);
  for (int k = 0; k < g.size(); ++k) CHECK(back.values[k] == f.values[k]);
  std::remove(path.c_str());
}

TEST_CASE("field reader rejects malformed input") {
  {
    std::ofstream os("bad_magic.pfld", std::ios::binary);
    os << "NOPE!" << std::string(64, '\0');
  }
  CHECK_THROWS(read_field("bad_magic.pfld"));
  std::remove("bad_magic.pfld");

  GridSpec g(5, 5, 1.0, 1.0);
  ScalarField f(g, 1.0);
  write_field("trunc.pfld", f);
  {
    // chop the payload
    std::ifstream is("trunc.pfld", std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
    std::ofstream os("trunc.pfld", std::ios::binary);
    os.write(all.data(), static_cast<std::streamsize>(all.size() - 16));
  }
  CHECK_THROWS(read_field("trunc.pfld"));
  std::remove("trunc.pfld");

  f(2, 2) = std::nan("");
  write_field("nanfield.pfld", f);
  CHECK_THROWS(read_field("nanfield.pfld"));
  std::remove("nanfield.pfld");
}

TEST_CASE("csv export enumerates 3x3 field") {
  GridSpec g(3, 3, 2.0, 2.0);
  ScalarField f(g);
  for (int k = 0; k < 9; ++k) f.values[k] = k;
  write_field_csv("export.csv", f);
  std::ifstream is("export.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "i,j,x,y,value");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 9);
  std::remove("export.csv");
}
