#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisnet/backend.hpp"
#include "poisnet/constants.hpp"
#include "poisnet/field.hpp"

namespace poisnet {

// Swarm coefficients versus reduced field E/N, sampled for log-linear
// interpolation. The default is a simplified dry-air set (Townsend-form
// ionization, constant mobility-density product); magnitudes are standard
// but not a Morrow-fit reproduction, so runs are qualitative by design.
struct ChemistryTable {
  std::vector<double> EN;     // reduced field samples (V m^2), ascending
  std::vector<double> mu;     // electron mobility (m^2 V^-1 s^-1)
  std::vector<double> De;     // electron diffusion (m^2 s^-1)
  std::vector<double> alpha;  // ionization coefficient (m^-1)
  std::vector<double> eta;    // attachment coefficient (m^-1)
  double beta = 2.0e-13;      // recombination rate (m^3 s^-1)
  double N = 2.45e25;         // neutral gas density (m^-3)
  mutable long clamp_warnings = 0;

  void validate() const {
    detail::require(EN.size() >= 2 && mu.size() == EN.size() &&
                        De.size() == EN.size() && alpha.size() == EN.size() &&
                        eta.size() == EN.size(),
                    "ChemistryTable: inconsistent sample arrays");
    for (std::size_t k = 1; k < EN.size(); ++k) {
      detail::require(EN[k] > EN[k - 1], "ChemistryTable: abscissa not increasing");
      detail::require(alpha[k] >= alpha[k - 1],
                      "ChemistryTable: alpha must be non-decreasing");
    }
    for (std::size_t k = 0; k < EN.size(); ++k)
      detail::require(mu[k] >= 0 && De[k] >= 0 && alpha[k] >= 0 && eta[k] >= 0,
                      "ChemistryTable: negative coefficient");
    detail::require(beta >= 0 && N > 0, "ChemistryTable: bad scalars");
  }

  static ChemistryTable default_air() {
    ChemistryTable t;
    const int samples = 64;
    const double lo = 1.0e-21, hi = 1.0e-18;
    for (int k = 0; k < samples; ++k) {
      const double en = lo * std::pow(hi / lo, k / double(samples - 1));
      t.EN.push_back(en);
      t.mu.push_back(1.0e24 / t.N);                       // constant mu*N
      t.De.push_back(0.18);
      t.alpha.push_back(t.N * 1.0e-20 * std::exp(-7.4e-19 / en));
      t.eta.push_back(t.N * 2.0e-23);                     // constant eta/N
    }
    t.validate();
    return t;
  }
};

struct Rates {
  double We = 0.0;  // drift speed magnitude |W_e| = mu E (m/s)
  double De = 0.0;
  double alpha = 0.0;
  double eta = 0.0;
};

// Log-linear interpolation in E/N, clamped to the table range (clamps are
// counted on the table).
inline Rates rates(double E_norm, const ChemistryTable& chem) {
  detail::require(E_norm >= 0.0, "rates: field magnitude must be >= 0");
  double en = E_norm / chem.N;
  if (en < chem.EN.front() || en > chem.EN.back()) {
    ++chem.clamp_warnings;
    en = std::clamp(en, chem.EN.front(), chem.EN.back());
  }
  const auto it = std::upper_bound(chem.EN.begin(), chem.EN.end(), en);
  std::size_t hi = std::min<std::size_t>(
      std::max<std::ptrdiff_t>(it - chem.EN.begin(), 1), chem.EN.size() - 1);
  const std::size_t lo = hi - 1;
  const double w =
      (std::log(en) - std::log(chem.EN[lo])) /
      (std::log(chem.EN[hi]) - std::log(chem.EN[lo]));
  auto lerp = [&](const std::vector<double>& v) {
    return v[lo] + w * (v[hi] - v[lo]);
  };
  Rates r;
  r.De = lerp(chem.De);
  r.alpha = lerp(chem.alpha);
  r.eta = lerp(chem.eta);
  r.We = lerp(chem.mu) * E_norm;
  return r;
}

inline double mobility(double E_norm, const ChemistryTable& chem) {
  const Rates r = rates(std::max(E_norm, 0.0), chem);
  return E_norm > 0.0 ? r.We / E_norm : r.We;
}

// ---------------------------------------------------------------------------
// State: three species densities on an axisymmetric grid (x along the axis,
// r radial with the axis at j = 0); ions are immobile.
// ---------------------------------------------------------------------------
struct StreamerState {
  GridSpec grid;
  std::vector<double> ne, np, nn;  // m^-3
  double t = 0.0;
  double discharge_energy = 0.0;   // J, accumulated
  double floored_mass = 0.0;       // volume-weighted density clipped to 0
  long cfl_warnings = 0;

  explicit StreamerState(const GridSpec& g)
      : grid(g), ne(g.size(), 0.0), np(g.size(), 0.0), nn(g.size(), 0.0) {
    detail::require(g.geometry == Geometry::axisymmetric,
                    "StreamerState: axisymmetric grid required");
  }
};

// Exact integral of r over the node's radial cell: [0, dr/2] at the axis,
// [r - dr/2, r + dr/2] inside, [Lr - dr/2, Lr] at the outer wall.
inline double radial_cell_area(const GridSpec& g, int j) {
  const double dr = g.dy();
  if (j == 0) return dr * dr / 8.0;
  if (j == g.ny - 1) return 0.5 * g.r(j) * dr - dr * dr / 8.0;
  return g.r(j) * dr;
}

// Cell volume for the node-centered axisymmetric mesh (2 pi r dr dx with
// half cells at the axis, outer radius and x ends).
inline double cell_volume(const GridSpec& g, int i, int j) {
  const double wx = (i == 0 || i == g.nx - 1) ? 0.5 : 1.0;
  return 2.0 * M_PI * radial_cell_area(g, j) * wx * g.dx();
}

inline StreamerState init_streamer(const GridSpec& grid, double n0,
                                   double n_back, double x0, double sigma_x,
                                   double sigma_r) {
  detail::require(x0 >= 0.0 && x0 <= grid.Lx, "init_streamer: x0 in domain");
  StreamerState s(grid);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const double dx = (grid.x(i) - x0) / sigma_x;
      const double rr = grid.r(j) / sigma_r;
      const int k = grid.idx(i, j);
      s.ne[k] = n0 * std::exp(-dx * dx - rr * rr) + n_back;
      s.np[k] = s.ne[k];
    }
  return s;
}

// R = e (n_p - n_e - n_n) / eps0.
inline ScalarField poisson_rhs(const StreamerState& s) {
  ScalarField R(s.grid);
  using namespace constants;
  for (int k = 0; k < s.grid.size(); ++k)
    R.values[k] =
        elementary_charge * (s.np[k] - s.ne[k] - s.nn[k]) / vacuum_permittivity;
  return R;
}

// E = -grad(phi) + Ex e_x: the applied background enters by superposition,
// the solve itself carries zero Dirichlet data.
inline VectorField total_field(const ScalarField& phi_zero_bc,
                               double Ex_background) {
  VectorField E = gradient_to_efield(phi_zero_bc);
  for (double& v : E.x) v += Ex_background;
  return E;
}

// One explicit Euler step: first-order upwind electron advection, central
// diffusion, chemistry sources exactly as printed; ions do not move.
// Densities are floored at zero with the clipped mass accounted.
inline StreamerState step(const StreamerState& s, const VectorField& E,
                          const ChemistryTable& chem, double dt) {
  const GridSpec& g = s.grid;
  detail::require(E.grid == g, "step: field/state grid mismatch");
  const int nx = g.nx, ny = g.ny;
  const double dx = g.dx(), dr = g.dy();

  // rates and drift velocity per node
  std::vector<double> wx(g.size()), wr(g.size()), de(g.size()),
      src_e(g.size()), src_p(g.size()), src_n(g.size());
  double wmax = 0.0, de_max = 0.0, relax_min = 1e300;
  using namespace constants;
  for (int k = 0; k < g.size(); ++k) {
    const double Emag = std::hypot(E.x[k], E.y[k]);
    const Rates r = rates(Emag, chem);
    const double mu = Emag > 0.0 ? r.We / Emag : 0.0;
    wx[k] = -mu * E.x[k];  // W_e = -mu_e E
    wr[k] = -mu * E.y[k];
    de[k] = r.De;
    wmax = std::max(wmax, std::hypot(wx[k], wr[k]));
    de_max = std::max(de_max, r.De);
    if (s.ne[k] > 0.0 && mu > 0.0)
      relax_min = std::min(relax_min, vacuum_permittivity /
                                          (elementary_charge * s.ne[k] * mu));
    const double growth = r.alpha * r.We, attach = r.eta * r.We;
    src_e[k] = s.ne[k] * growth - s.ne[k] * attach -
               s.ne[k] * s.np[k] * chem.beta;
    src_p[k] = s.ne[k] * growth - s.ne[k] * s.np[k] * chem.beta -
               s.nn[k] * s.np[k] * chem.beta;
    src_n[k] = s.ne[k] * attach - s.nn[k] * s.np[k] * chem.beta;
  }

  StreamerState out = s;
  out.t = s.t + dt;
  if (wmax * dt > std::min(dx, dr) ||
      dt > 0.25 * std::min(dx * dx, dr * dr) / std::max(de_max, 1e-300) ||
      dt > relax_min)
    ++out.cfl_warnings;

  // divergence of the electron flux (advection upwind, diffusion central)
  auto face_flux_x = [&](int i, int j) {
    // face between (i, j) and (i+1, j)
    const int ka = g.idx(i, j), kb = g.idx(i + 1, j);
    const double w = 0.5 * (wx[ka] + wx[kb]);
    const double adv = w >= 0.0 ? w * s.ne[ka] : w * s.ne[kb];
    const double diff = -0.5 * (de[ka] + de[kb]) * (s.ne[kb] - s.ne[ka]) / dx;
    return adv + diff;
  };
  auto face_flux_r = [&](int i, int j) {
    // face between (i, j) and (i, j+1)
    const int ka = g.idx(i, j), kb = g.idx(i, j + 1);
    const double w = 0.5 * (wr[ka] + wr[kb]);
    const double adv = w >= 0.0 ? w * s.ne[ka] : w * s.ne[kb];
    const double diff = -0.5 * (de[ka] + de[kb]) * (s.ne[kb] - s.ne[ka]) / dr;
    return adv + diff;
  };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int k = g.idx(i, j);
      // x-direction: zero-flux walls
      const double fxr = (i < nx - 1) ? face_flux_x(i, j) : 0.0;
      const double fxl = (i > 0) ? face_flux_x(i - 1, j) : 0.0;
      const double wx_cell = (i == 0 || i == nx - 1) ? 0.5 : 1.0;
      double div = (fxr - fxl) / (dx * wx_cell);

      // r-direction: conservative with face radii; no flux through the
      // axis or the outer wall
      const double area = radial_cell_area(g, j);
      const double frt =
          (j < ny - 1) ? (g.r(j) + 0.5 * dr) * face_flux_r(i, j) : 0.0;
      const double frb =
          (j > 0) ? (g.r(j) - 0.5 * dr) * face_flux_r(i, j - 1) : 0.0;
      div += (frt - frb) / area;

      double ne_new = s.ne[k] + dt * (-div + src_e[k]);
      double np_new = s.np[k] + dt * src_p[k];
      double nn_new = s.nn[k] + dt * src_n[k];
      if (!std::isfinite(ne_new) || !std::isfinite(np_new) ||
          !std::isfinite(nn_new))
        throw std::runtime_error("step: densities diverged at t = " +
                                 std::to_string(out.t));
      const double vol = cell_volume(g, i, j);
      if (ne_new < 0.0) { out.floored_mass -= ne_new * vol; ne_new = 0.0; }
      if (np_new < 0.0) { out.floored_mass -= np_new * vol; np_new = 0.0; }
      if (nn_new < 0.0) { out.floored_mass -= nn_new * vol; nn_new = 0.0; }
      out.ne[k] = ne_new;
      out.np[k] = np_new;
      out.nn[k] = nn_new;
    }
  }
  return out;
}

// E_d increment: integral of J . E = e n_e mu_e |E|^2 over the volume,
// times dt; accumulated on the state by the run loop.
inline double discharge_energy_increment(const StreamerState& s,
                                         const VectorField& E,
                                         const ChemistryTable& chem,
                                         double dt) {
  using namespace constants;
  double acc = 0.0;
  for (int j = 0; j < s.grid.ny; ++j)
    for (int i = 0; i < s.grid.nx; ++i) {
      const int k = s.grid.idx(i, j);
      const double Emag2 = E.x[k] * E.x[k] + E.y[k] * E.y[k];
      const double mu = mobility(std::sqrt(Emag2), chem);
      acc += elementary_charge * s.ne[k] * mu * Emag2 *
             cell_volume(s.grid, i, j);
    }
  return acc * dt;
}

// Axial positions of the |E| maxima on each side of the seed; sides without
// an interior local maximum report x0.
inline std::pair<double, double> front_positions(const VectorField& E,
                                                 double x0) {
  const GridSpec& g = E.grid;
  std::vector<double> mag(g.nx);
  for (int i = 0; i < g.nx; ++i)
    mag[i] = std::hypot(E.x[g.idx(i, 0)], E.y[g.idx(i, 0)]);
  const int i0 = static_cast<int>(std::lround(x0 / g.dx()));

  auto side_peak = [&](int lo, int hi) {
    int best = -1;
    for (int i = std::max(lo, 1); i <= std::min(hi, g.nx - 2); ++i)
      if (mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
        if (best < 0 || mag[i] > mag[best]) best = i;
    return best;
  };
  const int left = side_peak(1, i0 - 1);
  const int right = side_peak(i0 + 1, g.nx - 2);
  return {left >= 0 ? g.x(left) : x0, right >= 0 ? g.x(right) : x0};
}

// ---------------------------------------------------------------------------
// Coupled run
// ---------------------------------------------------------------------------

struct StreamerConfig {
  GridSpec grid{401, 101, 4.0e-3, 1.0e-3, Geometry::axisymmetric};
  double n0 = 1.0e19;      // seed peak (m^-3)
  double n_back = 1.0e14;  // background (m^-3)
  double x0 = 2.0e-3;      // seed position (m)
  double sigma_x = 1.0e-4;
  double sigma_r = 1.0e-4;
  double Ex = 4.8e6;       // applied field (V/m)
  double dt = 1.0e-12;     // s
  int steps = 2800;
  int record_every = 50;
  std::vector<double> snapshot_times;
};

struct StreamerDiagnostics {
  std::vector<double> t, x_neg, x_pos, Ed, max_E, max_ne;
  std::vector<std::pair<double, ScalarField>> snapshots;
  long cfl_warnings = 0;
  double floored_mass = 0.0;

  void write_csv(const std::string& path) const {
    std::ofstream os(path);
    os << "t,x_neg,x_pos,Ed,max_E,max_ne\n";
    os.precision(17);
    for (std::size_t k = 0; k < t.size(); ++k)
      os << t[k] << ',' << x_neg[k] << ',' << x_pos[k] << ',' << Ed[k] << ','
         << max_E[k] << ',' << max_ne[k] << '\n';
  }
};

inline StreamerDiagnostics run_streamer(const StreamerConfig& cfg,
                                        const ChemistryTable& chem,
                                        PoissonBackend& backend) {
  chem.validate();
  StreamerState state = init_streamer(cfg.grid, cfg.n0, cfg.n_back, cfg.x0,
                                      cfg.sigma_x, cfg.sigma_r);
  StreamerDiagnostics diag;
  std::vector<double> snap_times = cfg.snapshot_times;
  std::sort(snap_times.begin(), snap_times.end());
  std::size_t next_snapshot = 0;

  auto record = [&](const StreamerState& s, const VectorField& E) {
    const auto [xn, xp] = front_positions(E, cfg.x0);
    double emax = 0.0, nemax = 0.0;
    for (int k = 0; k < cfg.grid.size(); ++k) {
      emax = std::max(emax, std::hypot(E.x[k], E.y[k]));
      nemax = std::max(nemax, s.ne[k]);
    }
    diag.t.push_back(s.t);
    diag.x_neg.push_back(xn);
    diag.x_pos.push_back(xp);
    diag.Ed.push_back(s.discharge_energy);
    diag.max_E.push_back(emax);
    diag.max_ne.push_back(nemax);
  };

  for (int stepped = 0; stepped < cfg.steps; ++stepped) {
    ScalarField R = poisson_rhs(state);
    ScalarField phi;
    try {
      phi = backend.solve(R);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_streamer: backend failed at step " +
                               std::to_string(stepped) + ": " + e.what());
    }
    VectorField E = total_field(phi, cfg.Ex);
    if (stepped % cfg.record_every == 0) record(state, E);
    state.discharge_energy +=
        discharge_energy_increment(state, E, chem, cfg.dt);
    try {
      state = step(state, E, chem, cfg.dt);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_streamer: step " +
                               std::to_string(stepped) + " failed: " +
                               e.what());
    }
    if (next_snapshot < snap_times.size() &&
        state.t >= snap_times[next_snapshot]) {
      ScalarField ne(cfg.grid);
      for (int k = 0; k < cfg.grid.size(); ++k) ne.values[k] = state.ne[k];
      diag.snapshots.emplace_back(state.t, std::move(ne));
      ++next_snapshot;
    }
  }
  {
    ScalarField R = poisson_rhs(state);
    ScalarField phi = backend.solve(R);
    record(state, total_field(phi, cfg.Ex));
  }
  diag.cfl_warnings = state.cfl_warnings;
  diag.floored_mass = state.floored_mass;
  return diag;
}

// Volume-weighted electron count (for the bookkeeping property).
inline double total_electrons(const StreamerState& s) {
  double acc = 0.0;
  for (int j = 0; j < s.grid.ny; ++j)
    for (int i = 0; i < s.grid.nx; ++i)
      acc += s.ne[s.grid.idx(i, j)] * cell_volume(s.grid, i, j);
  return acc;
}

}  // namespace poisnet
