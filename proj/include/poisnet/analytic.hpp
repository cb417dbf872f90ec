#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "poisnet/field.hpp"
#include "poisnet/parallel.hpp"

namespace poisnet {

// Sine-mode coefficient matrix A_nm of a field on the zero-Dirichlet square.
struct ModeSpectrum {
  int N = 0;  // max mode index along x
  int M = 0;  // max mode index along y
  double Lx = 0.0;
  double Ly = 0.0;
  std::vector<double> coeffs;  // row-major, coeffs[(n-1)*M + (m-1)]

  ModeSpectrum() = default;
  ModeSpectrum(int N_, int M_, double Lx_, double Ly_)
      : N(N_), M(M_), Lx(Lx_), Ly(Ly_),
        coeffs(static_cast<std::size_t>(N_) * M_, 0.0) {
    if (N < 1 || M < 1) throw std::invalid_argument("ModeSpectrum: N, M >= 1");
  }
  double& at(int n, int m) { return coeffs[(n - 1) * static_cast<std::size_t>(M) + (m - 1)]; }
  double at(int n, int m) const { return coeffs[(n - 1) * static_cast<std::size_t>(M) + (m - 1)]; }
};

inline int default_mode_count(const GridSpec& g) {
  return std::min(64, std::min(g.nx, g.ny) - 1);
}

// Trapezoid-rule projection of R onto the sine basis.
inline ModeSpectrum fourier_coeffs(const ScalarField& R, int N, int M) {
  const GridSpec& g = R.grid;
  detail::require(g.geometry == Geometry::cartesian,
                  "fourier_coeffs: cartesian grid required");
  detail::require(N >= 1 && M >= 1, "fourier_coeffs: N, M >= 1");
  detail::require(N <= g.nx - 1 && M <= g.ny - 1,
                  "fourier_coeffs: mode count beyond grid Nyquist");
  ModeSpectrum spec(N, M, g.Lx, g.Ly);
  // Precompute sine tables; projection cost is N*M*nx*ny otherwise.
  std::vector<double> sx(static_cast<std::size_t>(N) * g.nx);
  std::vector<double> sy(static_cast<std::size_t>(M) * g.ny);
  for (int n = 1; n <= N; ++n)
    for (int i = 0; i < g.nx; ++i)
      sx[(n - 1) * g.nx + i] = std::sin(n * M_PI * g.x(i) / g.Lx);
  for (int m = 1; m <= M; ++m)
    for (int j = 0; j < g.ny; ++j)
      sy[(m - 1) * g.ny + j] = std::sin(m * M_PI * g.y(j) / g.Ly);

  const double scale = 4.0 / (g.Lx * g.Ly) * g.dx() * g.dy();
  parallel_for(1, N + 1, [&](std::ptrdiff_t n) {
    // Row sums over x for each j, reused across m.
    std::vector<double> rowsum(g.ny, 0.0);
    for (int j = 0; j < g.ny; ++j) {
      const double wy = (j == 0 || j == g.ny - 1) ? 0.5 : 1.0;
      double acc = 0.0;
      for (int i = 0; i < g.nx; ++i) {
        const double wx = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
        acc += wx * sx[(n - 1) * g.nx + i] * R(i, j);
      }
      rowsum[j] = wy * acc;
    }
    for (int m = 1; m <= M; ++m) {
      double acc = 0.0;
      for (int j = 0; j < g.ny; ++j) acc += sy[(m - 1) * g.ny + j] * rowsum[j];
      spec.at(static_cast<int>(n), m) = scale * acc;
    }
  });
  return spec;
}

// phi_nm = R_nm / ((n pi/Lx)^2 + (m pi/Ly)^2), then sine synthesis on the
// grid. The result is exactly zero on all four boundaries.
inline ScalarField potential_from_spectrum(const ModeSpectrum& spec,
                                           const GridSpec& g) {
  detail::require(spec.Lx == g.Lx && spec.Ly == g.Ly,
                  "potential_from_spectrum: spectrum/grid domain mismatch");
  ScalarField phi(g);
  std::vector<double> sx(static_cast<std::size_t>(spec.N) * g.nx);
  std::vector<double> sy(static_cast<std::size_t>(spec.M) * g.ny);
  for (int n = 1; n <= spec.N; ++n)
    for (int i = 0; i < g.nx; ++i)
      sx[(n - 1) * g.nx + i] = std::sin(n * M_PI * g.x(i) / g.Lx);
  for (int m = 1; m <= spec.M; ++m)
    for (int j = 0; j < g.ny; ++j)
      sy[(m - 1) * g.ny + j] = std::sin(m * M_PI * g.y(j) / g.Ly);

  parallel_for(0, g.ny, [&](std::ptrdiff_t j) {
    for (int i = 0; i < g.nx; ++i) {
      double acc = 0.0;
      for (int n = 1; n <= spec.N; ++n) {
        const double kx = n * M_PI / g.Lx;
        double inner = 0.0;
        for (int m = 1; m <= spec.M; ++m) {
          const double ky = m * M_PI / g.Ly;
          inner += spec.at(n, m) / (kx * kx + ky * ky) *
                   sy[(m - 1) * g.ny + j];
        }
        acc += inner * sx[(n - 1) * g.nx + i];
      }
      phi(i, static_cast<int>(j)) = acc;
    }
  });
  // Exact zeros on the boundary, independent of sine round-off.
  for (int i = 0; i < g.nx; ++i) {
    phi(i, 0) = 0.0;
    phi(i, g.ny - 1) = 0.0;
  }
  for (int j = 0; j < g.ny; ++j) {
    phi(0, j) = 0.0;
    phi(g.nx - 1, j) = 0.0;
  }
  return phi;
}

// Exact Fourier-series solution of the zero-Dirichlet Poisson problem:
// projection followed by synthesis.
inline ScalarField solve_analytic(const ScalarField& R, int N, int M) {
  return potential_from_spectrum(fourier_coeffs(R, N, M), R.grid);
}

inline ScalarField solve_analytic(const ScalarField& R) {
  const int n = default_mode_count(R.grid);
  return solve_analytic(R, n, n);
}

// Single sine-product field: amplitude * sin(n pi x/Lx) sin(m pi y/Ly).
inline ScalarField mode_field(int n, int m, double amplitude,
                              const GridSpec& g) {
  detail::require(n >= 1 && m >= 1, "mode_field: mode indices start at 1");
  ScalarField f(g);
  for (int j = 0; j < g.ny; ++j) {
    const double sy = std::sin(m * M_PI * g.y(j) / g.Ly);
    for (int i = 0; i < g.nx; ++i)
      f(i, j) = amplitude * std::sin(n * M_PI * g.x(i) / g.Lx) * sy;
  }
  return f;
}

// |phi/R|_max = alpha / ((pi^2/4)^2 (1/Lx^2 + 1/Ly^2)): the charge-density
// scaling constant that brings input and output magnitudes to the same order.
inline double normalization_ratio(double Lx, double Ly, double alpha = 0.1) {
  detail::require(alpha >= 0.0 && alpha <= 1.0,
                  "normalization_ratio: alpha in [0, 1]");
  const double q = (M_PI * M_PI / 4.0) * (M_PI * M_PI / 4.0);
  return alpha / (q * (1.0 / (Lx * Lx) + 1.0 / (Ly * Ly)));
}

// Multiplicative correction applied to network output when inferring at a
// resolution other than the trained one: Delta_sim^2 / Delta_NN^2.
inline double resolution_ratio(double delta_sim, double delta_nn) {
  detail::require(delta_sim > 0.0 && delta_nn > 0.0,
                  "resolution_ratio: spacings must be positive");
  return (delta_sim * delta_sim) / (delta_nn * delta_nn);
}

}  // namespace poisnet
