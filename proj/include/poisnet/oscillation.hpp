#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisnet/backend.hpp"
#include "poisnet/constants.hpp"
#include "poisnet/field.hpp"

namespace poisnet {

// omega_p = sqrt(n0 e^2 / (m_e eps0)) and the period 2 pi / omega_p.
inline std::pair<double, double> plasma_frequency(double n0) {
  detail::require(n0 > 0.0, "plasma_frequency: n0 > 0");
  using namespace constants;
  const double omega = std::sqrt(n0 * elementary_charge * elementary_charge /
                                 (electron_mass * vacuum_permittivity));
  return {omega, 2.0 * M_PI / omega};
}

// Conservative electron-fluid state on a cartesian grid: mass density,
// momentum and total energy per volume, over a fixed ion background n0.
struct PlasmaState {
  GridSpec grid;
  std::vector<double> rho;     // m_e * n_electron
  std::vector<double> mx, my;  // momentum density
  std::vector<double> en;      // total energy density
  double n0 = 0.0;             // ion background (m^-3)
  double t = 0.0;

  explicit PlasmaState(const GridSpec& g)
      : grid(g),
        rho(g.size(), 0.0),
        mx(g.size(), 0.0),
        my(g.size(), 0.0),
        en(g.size(), 0.0) {}

  double electron_density(int k) const {
    return rho[k] / constants::electron_mass;
  }
};

inline constexpr double plasma_gamma = 5.0 / 3.0;

// Electrons at rest with a two-Gaussian density perturbation over the
// neutral background, uniform temperature T0.
inline PlasmaState init_two_gaussians(const GridSpec& grid, double n0,
                                      double ne_amp,
                                      std::array<double, 2> center1,
                                      std::array<double, 2> center2,
                                      double sigma, double T0) {
  detail::require(ne_amp >= 0.0 && ne_amp < 1e-3 * n0,
                  "init_two_gaussians: perturbation must satisfy ne << n0");
  PlasmaState s(grid);
  s.n0 = n0;
  using namespace constants;
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const double x = grid.x(i), y = grid.y(j);
      const double d1 = (x - center1[0]) * (x - center1[0]) +
                        (y - center1[1]) * (y - center1[1]);
      const double d2 = (x - center2[0]) * (x - center2[0]) +
                        (y - center2[1]) * (y - center2[1]);
      const double ne = n0 + ne_amp * (std::exp(-d1 / (sigma * sigma)) +
                                       std::exp(-d2 / (sigma * sigma)));
      const int k = grid.idx(i, j);
      s.rho[k] = electron_mass * ne;
      const double p = ne * boltzmann * T0;
      s.en[k] = p / (plasma_gamma - 1.0);
    }
  return s;
}

// R = e (n0 - n_e) / eps0: the Poisson source of the electron perturbation.
inline ScalarField charge_density(const PlasmaState& s) {
  ScalarField R(s.grid);
  using namespace constants;
  for (int k = 0; k < s.grid.size(); ++k)
    R.values[k] = elementary_charge * (s.n0 - s.electron_density(k)) /
                  vacuum_permittivity;
  return R;
}

namespace euler {

struct Cons {
  double rho, mx, my, en;
};

inline double pressure(const Cons& u) {
  const double kin = 0.5 * (u.mx * u.mx + u.my * u.my) / u.rho;
  return (plasma_gamma - 1.0) * (u.en - kin);
}

inline Cons flux_x(const Cons& u) {
  const double p = pressure(u);
  const double vx = u.mx / u.rho;
  return {u.mx, u.mx * vx + p, u.my * vx, (u.en + p) * vx};
}

inline Cons flux_y(const Cons& u) {
  const double p = pressure(u);
  const double vy = u.my / u.rho;
  return {u.my, u.mx * vy, u.my * vy + p, (u.en + p) * vy};
}

// Momentum/energy source q n E with q = -e for electrons.
inline Cons source(const Cons& u, double Ex, double Ey) {
  const double qn = -constants::elementary_charge * u.rho /
                    constants::electron_mass;
  return {0.0, qn * Ex, qn * Ey,
          qn * (Ex * u.mx + Ey * u.my) / u.rho};
}

inline Cons axpy(const Cons& a, double s, const Cons& b) {
  return {a.rho + s * b.rho, a.mx + s * b.mx, a.my + s * b.my,
          a.en + s * b.en};
}

inline double sound_speed(const Cons& u) {
  return std::sqrt(plasma_gamma * pressure(u) / u.rho);
}

}  // namespace euler

inline double acoustic_cfl_dt(const PlasmaState& s) {
  double vmax = 0.0;
  for (int k = 0; k < s.grid.size(); ++k) {
    euler::Cons u{s.rho[k], s.mx[k], s.my[k], s.en[k]};
    const double v = std::hypot(u.mx / u.rho, u.my / u.rho);
    vmax = std::max(vmax, v + euler::sound_speed(u));
  }
  return std::min(s.grid.dx(), s.grid.dy()) / vmax;
}

// One two-stage Lax-Wendroff (Richtmyer) step with the electric-field source
// in both stages. Solid walls: boundary faces carry a pressure-only flux, so
// mass and energy are conserved to round-off. E is frozen during the step.
inline PlasmaState step_lax_wendroff(const PlasmaState& s,
                                     const VectorField& E, double dt) {
  const GridSpec& g = s.grid;
  detail::require(E.grid == g, "step_lax_wendroff: grid mismatch");
  const double cfl = acoustic_cfl_dt(s);
  detail::require(dt <= cfl,
                  "step_lax_wendroff: dt violates the acoustic CFL limit");
  const int nx = g.nx, ny = g.ny;
  const double lx = dt / g.dx(), ly = dt / g.dy();

  auto at = [&](const PlasmaState& st, int i, int j) {
    const int k = g.idx(i, j);
    return euler::Cons{st.rho[k], st.mx[k], st.my[k], st.en[k]};
  };
  auto efield = [&](int i, int j) {
    const int k = g.idx(i, j);
    return std::array<double, 2>{E.x[k], E.y[k]};
  };

  // Predictor: face-centered half-step states. Interior faces only; wall
  // faces are handled by the wall flux directly.
  std::vector<euler::Cons> fx(static_cast<std::size_t>(nx - 1) * ny);
  std::vector<euler::Cons> fy(static_cast<std::size_t>(nx) * (ny - 1));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx - 1; ++i) {
      const euler::Cons a = at(s, i, j), b = at(s, i + 1, j);
      euler::Cons half = euler::axpy({0.5 * (a.rho + b.rho),
                                      0.5 * (a.mx + b.mx),
                                      0.5 * (a.my + b.my),
                                      0.5 * (a.en + b.en)},
                                     -0.5 * lx,
                                     euler::axpy(euler::flux_x(b), -1.0,
                                                 euler::flux_x(a)));
      const auto Ea = efield(i, j), Eb = efield(i + 1, j);
      const euler::Cons sa = euler::source(a, Ea[0], Ea[1]);
      const euler::Cons sb = euler::source(b, Eb[0], Eb[1]);
      half = euler::axpy(half, 0.25 * dt, euler::axpy(sa, 1.0, sb));
      fx[j * (nx - 1) + i] = half;
    }
  for (int j = 0; j < ny - 1; ++j)
    for (int i = 0; i < nx; ++i) {
      const euler::Cons a = at(s, i, j), b = at(s, i, j + 1);
      euler::Cons half = euler::axpy({0.5 * (a.rho + b.rho),
                                      0.5 * (a.mx + b.mx),
                                      0.5 * (a.my + b.my),
                                      0.5 * (a.en + b.en)},
                                     -0.5 * ly,
                                     euler::axpy(euler::flux_y(b), -1.0,
                                                 euler::flux_y(a)));
      const auto Ea = efield(i, j), Eb = efield(i, j + 1);
      const euler::Cons sa = euler::source(a, Ea[0], Ea[1]);
      const euler::Cons sb = euler::source(b, Eb[0], Eb[1]);
      half = euler::axpy(half, 0.25 * dt, euler::axpy(sa, 1.0, sb));
      fy[j * nx + i] = half;
    }

  PlasmaState out = s;
  out.t = s.t + dt;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int k = g.idx(i, j);
      const euler::Cons u = at(s, i, j);

      // corrector fluxes; wall faces reduce to a pressure push on momentum
      euler::Cons FxR = (i < nx - 1) ? euler::flux_x(fx[j * (nx - 1) + i])
                                     : euler::Cons{0.0, euler::pressure(u), 0.0, 0.0};
      euler::Cons FxL = (i > 0) ? euler::flux_x(fx[j * (nx - 1) + i - 1])
                                : euler::Cons{0.0, euler::pressure(u), 0.0, 0.0};
      euler::Cons FyT = (j < ny - 1) ? euler::flux_y(fy[j * nx + i])
                                     : euler::Cons{0.0, 0.0, euler::pressure(u), 0.0};
      euler::Cons FyB = (j > 0) ? euler::flux_y(fy[(j - 1) * nx + i])
                                : euler::Cons{0.0, 0.0, euler::pressure(u), 0.0};

      euler::Cons next = euler::axpy(u, -lx, euler::axpy(FxR, -1.0, FxL));
      next = euler::axpy(next, -ly, euler::axpy(FyT, -1.0, FyB));

      // midpoint source from the surrounding half-step states
      euler::Cons mid = u;
      int contributions = 0;
      euler::Cons acc{0, 0, 0, 0};
      if (i < nx - 1) { acc = euler::axpy(acc, 1.0, fx[j * (nx - 1) + i]); ++contributions; }
      if (i > 0) { acc = euler::axpy(acc, 1.0, fx[j * (nx - 1) + i - 1]); ++contributions; }
      if (j < ny - 1) { acc = euler::axpy(acc, 1.0, fy[j * nx + i]); ++contributions; }
      if (j > 0) { acc = euler::axpy(acc, 1.0, fy[(j - 1) * nx + i]); ++contributions; }
      if (contributions > 0)
        mid = euler::Cons{acc.rho / contributions, acc.mx / contributions,
                          acc.my / contributions, acc.en / contributions};
      const auto Ec = efield(i, j);
      next = euler::axpy(next, dt, euler::source(mid, Ec[0], Ec[1]));

      if (!(next.rho > 0.0) || !std::isfinite(next.rho) ||
          !std::isfinite(next.en))
        throw std::runtime_error(
            "step_lax_wendroff: non-positive or non-finite density at t = " +
            std::to_string(out.t));
      out.rho[k] = next.rho;
      out.mx[k] = next.mx;
      out.my[k] = next.my;
      out.en[k] = next.en;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Coupled run
// ---------------------------------------------------------------------------

struct OscillationConfig {
  GridSpec grid{61, 61, 0.01, 0.01};
  double n0 = 1.0e16;       // m^-3
  double ne_amp = 1.0e11;   // m^-3
  double sigma = 1.0e-3;    // m
  std::array<double, 2> center1{0.004, 0.005};
  std::array<double, 2> center2{0.006, 0.005};
  double T0 = 300.0;        // K
  double periods = 2.0;
  // The field is frozen during each step, which feeds amplitude growth of
  // about exp(2 pi^2 periods / steps_per_period); 384 keeps a 2-period
  // envelope drift near 5%.
  int steps_per_period = 384;
  double probe_threshold = 0.1;  // fraction of the initial perturbation max
  std::vector<double> snapshot_times;
};

struct OscillationDiagnostics {
  std::vector<double> t;
  std::vector<double> mean_probe;  // mean n_e - n0 over the probe region
  std::vector<double> max_probe;   // max |n_e - n0| over the grid
  std::vector<std::pair<double, ScalarField>> snapshots;
  double dt = 0.0;

  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    os << "t,mean_probe,max_probe\n";
    os.precision(17);
    for (std::size_t k = 0; k < t.size(); ++k)
      os << t[k] << ',' << mean_probe[k] << ',' << max_probe[k] << '\n';
  }
};

inline OscillationDiagnostics run_oscillation(const OscillationConfig& cfg,
                                              PoissonBackend& backend) {
  PlasmaState state =
      init_two_gaussians(cfg.grid, cfg.n0, cfg.ne_amp, cfg.center1,
                         cfg.center2, cfg.sigma, cfg.T0);
  const auto [omega_p, T_p] = plasma_frequency(cfg.n0);

  // probe region: nodes where the initial perturbation exceeds the
  // threshold fraction of its maximum
  std::vector<int> probe;
  {
    double peak = 0.0;
    for (int k = 0; k < cfg.grid.size(); ++k)
      peak = std::max(peak, std::abs(state.electron_density(k) - cfg.n0));
    for (int k = 0; k < cfg.grid.size(); ++k)
      if (std::abs(state.electron_density(k) - cfg.n0) >
          cfg.probe_threshold * peak)
        probe.push_back(k);
  }
  detail::require(!probe.empty(), "run_oscillation: empty probe region");

  const double dt =
      std::min(0.4 * acoustic_cfl_dt(state), T_p / cfg.steps_per_period);
  const int steps =
      static_cast<int>(std::ceil(cfg.periods * T_p / dt));

  OscillationDiagnostics diag;
  diag.dt = dt;
  std::size_t next_snapshot = 0;
  std::vector<double> snap_times = cfg.snapshot_times;
  std::sort(snap_times.begin(), snap_times.end());

  auto record = [&](const PlasmaState& s) {
    double mean = 0.0, peak = 0.0;
    for (int k : probe) mean += s.electron_density(k) - cfg.n0;
    mean /= static_cast<double>(probe.size());
    for (int k = 0; k < cfg.grid.size(); ++k)
      peak = std::max(peak, std::abs(s.electron_density(k) - cfg.n0));
    diag.t.push_back(s.t);
    diag.mean_probe.push_back(mean);
    diag.max_probe.push_back(peak);
  };

  record(state);
  for (int step = 0; step < steps; ++step) {
    ScalarField R = charge_density(state);
    ScalarField phi;
    try {
      phi = backend.solve(R);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_oscillation: backend failed at step " +
                               std::to_string(step) + ": " + e.what());
    }
    VectorField E = gradient_to_efield(phi);
    state = step_lax_wendroff(state, E, dt);
    record(state);
    if (next_snapshot < snap_times.size() &&
        state.t >= snap_times[next_snapshot]) {
      ScalarField ne(cfg.grid);
      for (int k = 0; k < cfg.grid.size(); ++k)
        ne.values[k] = state.electron_density(k);
      diag.snapshots.emplace_back(state.t, std::move(ne));
      ++next_snapshot;
    }
  }
  return diag;
}

// Period estimate from zero-crossing intervals of the probe signal with
// linear interpolation between samples.
inline double measure_period(const std::vector<double>& t,
                             const std::vector<double>& signal) {
  detail::require(t.size() == signal.size() && t.size() >= 3,
                  "measure_period: malformed series");
  std::vector<double> crossings;
  for (std::size_t k = 1; k < signal.size(); ++k) {
    const double a = signal[k - 1], b = signal[k];
    if ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)) {
      const double frac = a / (a - b);
      crossings.push_back(t[k - 1] + frac * (t[k] - t[k - 1]));
    }
  }
  detail::require(crossings.size() >= 3,
                  "measure_period: fewer than 3 zero crossings");
  double acc = 0.0;
  for (std::size_t k = 1; k < crossings.size(); ++k)
    acc += crossings[k] - crossings[k - 1];
  return 2.0 * acc / static_cast<double>(crossings.size() - 1);
}

// Total electron mass (for the conservation property).
inline double total_mass(const PlasmaState& s) {
  double m = 0.0;
  for (double r : s.rho) m += r;
  return m * s.grid.dx() * s.grid.dy();
}

}  // namespace poisnet
