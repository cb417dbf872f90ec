#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisnet/analytic.hpp"
#include "poisnet/constants.hpp"
#include "poisnet/field.hpp"
#include "poisnet/linsolve.hpp"
#include "poisnet/parallel.hpp"
#include "poisnet/rng.hpp"

namespace poisnet {

enum class DatasetKind { random_c, fourier_N_p };

struct DatasetManifest {
  DatasetKind kind = DatasetKind::random_c;
  int count = 0;
  GridSpec grid;
  int c = 8;        // random_c structure size
  int N = 3;        // fourier band limit (M = N)
  double p = 0.0;   // fourier spectral decay
  std::uint64_t seed = 0;
  double normalization = 0.0;    // from normalization_ratio
  bool has_targets = false;
  double target_rtol = 0.0;
  std::vector<int> train_indices;
  std::vector<int> val_indices;
  std::string directory;

  std::string name() const {
    std::ostringstream os;
    if (kind == DatasetKind::random_c) {
      os << "random_" << c;
    } else {
      os << "fourier_" << N << '_' << p;
    }
    return os.str();
  }
  std::string charge_file(int idx) const {
    return directory + "/R_" + std::to_string(idx) + ".pfld";
  }
  std::string target_file(int idx) const {
    return directory + "/phi_" + std::to_string(idx) + ".pfld";
  }
};

// Default physical amplitude scale e*n0/eps0 with the oscillation-case
// background n0 = 1e16 m^-3.
inline double charge_scale(double n0 = 1.0e16) {
  return constants::elementary_charge * n0 / constants::vacuum_permittivity;
}

namespace detail {

// Catmull-Rom weights (a = -0.5) for fractional offset t in [0, 1).
inline void catmull_rom(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = -0.5 * t3 + t2 - 0.5 * t;
  w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
  w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
  w[3] = 0.5 * t3 - 0.5 * t2;
}

}  // namespace detail

// Random field with controlled structure size (before physical scaling):
// uniform values in [-1, 1] on a floor(n/c) coarse grid, bicubically
// interpolated to the fine grid with clamped edges.
inline ScalarField gen_random_raw(const GridSpec& grid, int c, Rng& rng) {
  detail::require(c >= 1, "gen_random: c >= 1");
  const int ncx = grid.nx / c;
  const int ncy = grid.ny / c;
  detail::require(ncx >= 2 && ncy >= 2,
                  "gen_random: coarse grid below 2x2, bicubic undefined");
  std::vector<double> coarse(static_cast<std::size_t>(ncx) * ncy);
  for (double& v : coarse) v = rng.uniform(-1.0, 1.0);
  auto at = [&](int ci, int cj) {
    ci = std::clamp(ci, 0, ncx - 1);
    cj = std::clamp(cj, 0, ncy - 1);
    return coarse[static_cast<std::size_t>(cj) * ncx + ci];
  };

  ScalarField out(grid);
  const double sx = (ncx - 1) / static_cast<double>(grid.nx - 1);
  const double sy = (ncy - 1) / static_cast<double>(grid.ny - 1);
  for (int j = 0; j < grid.ny; ++j) {
    const double fy = j * sy;
    const int cj = std::min(static_cast<int>(fy), ncy - 2);
    double wy[4];
    detail::catmull_rom(fy - cj, wy);
    for (int i = 0; i < grid.nx; ++i) {
      const double fx = i * sx;
      const int ci = std::min(static_cast<int>(fx), ncx - 2);
      double wx[4];
      detail::catmull_rom(fx - ci, wx);
      double acc = 0.0;
      for (int b = 0; b < 4; ++b)
        for (int a = 0; a < 4; ++a)
          acc += wy[b] * wx[a] * at(ci + a - 1, cj + b - 1);
      out(i, j) = acc;
    }
  }
  return out;
}

inline ScalarField gen_random(const GridSpec& grid, int c, Rng& rng,
                              double amplitude = charge_scale()) {
  ScalarField f = gen_random_raw(grid, c, rng);
  f *= amplitude;
  return f;
}

// Band-limited random charge: R_nm ~ (n^p + m^p)^-1 * amplitude * U(-1, 1)
// synthesized on the sine basis (exactly zero on the boundary).
inline ScalarField gen_fourier(const GridSpec& grid, int N, double p, Rng& rng,
                               double amplitude = charge_scale()) {
  detail::require(N >= 1, "gen_fourier: N >= 1");
  detail::require(N <= std::min(grid.nx, grid.ny) - 1,
                  "gen_fourier: N beyond grid Nyquist");
  ModeSpectrum spec(N, N, grid.Lx, grid.Ly);
  for (int n = 1; n <= N; ++n)
    for (int m = 1; m <= N; ++m)
      spec.at(n, m) = amplitude / (std::pow(n, p) + std::pow(m, p)) *
                      rng.uniform(-1.0, 1.0);
  ScalarField out(grid);
  for (int n = 1; n <= N; ++n)
    for (int m = 1; m <= N; ++m) {
      if (spec.at(n, m) == 0.0) continue;
      for (int j = 0; j < grid.ny; ++j) {
        const double sy = std::sin(m * M_PI * grid.y(j) / grid.Ly);
        for (int i = 0; i < grid.nx; ++i)
          out(i, j) += spec.at(n, m) *
                       std::sin(n * M_PI * grid.x(i) / grid.Lx) * sy;
      }
    }
  for (int i = 0; i < grid.nx; ++i) {
    out(i, 0) = 0.0;
    out(i, grid.ny - 1) = 0.0;
  }
  for (int j = 0; j < grid.ny; ++j) {
    out(0, j) = 0.0;
    out(grid.nx - 1, j) = 0.0;
  }
  return out;
}

// R~ = R * ratio (§3.3); the inverse divides.
inline ScalarField normalize_input(const ScalarField& R, double ratio) {
  detail::require(ratio > 0.0, "normalize_input: ratio > 0");
  ScalarField out = R;
  out *= ratio;
  return out;
}

inline ScalarField denormalize_input(const ScalarField& R, double ratio) {
  detail::require(ratio > 0.0, "denormalize_input: ratio > 0");
  ScalarField out = R;
  out *= 1.0 / ratio;
  return out;
}

// ---------------------------------------------------------------------------
// Dataset build / load
// ---------------------------------------------------------------------------

struct DatasetRequest {
  DatasetKind kind = DatasetKind::random_c;
  int count = 10;
  GridSpec grid;
  int c = 8;
  int N = 3;
  double p = 0.0;
  std::uint64_t seed = 0;
  double alpha = 0.1;  // normalization constant knob
  double amplitude = charge_scale();
  double train_fraction = 0.8;
};

enum class TargetSolver { none, cg };

inline ScalarField generate_sample(const DatasetRequest& req, int idx) {
  Rng rng = Rng::stream(req.seed, static_cast<std::uint64_t>(idx));
  if (req.kind == DatasetKind::random_c)
    return gen_random(req.grid, req.c, rng, req.amplitude);
  return gen_fourier(req.grid, req.N, req.p, rng, req.amplitude);
}

inline void write_manifest(const DatasetManifest& m) {
  std::ofstream os(m.directory + "/manifest.txt");
  if (!os) throw std::runtime_error("write_manifest: cannot open manifest.txt");
  os.precision(17);
  os << "kind " << (m.kind == DatasetKind::random_c ? "random" : "fourier")
     << "\n";
  os << "count " << m.count << "\n";
  os << "nx " << m.grid.nx << "\nny " << m.grid.ny << "\n";
  os << "Lx " << m.grid.Lx << "\nLy " << m.grid.Ly << "\n";
  os << "geometry "
     << (m.grid.geometry == Geometry::cartesian ? "cartesian" : "axisymmetric")
     << "\n";
  os << "c " << m.c << "\nN " << m.N << "\np " << m.p << "\n";
  os << "seed " << m.seed << "\n";
  os << "normalization " << m.normalization << "\n";
  os << "targets " << (m.has_targets ? 1 : 0) << "\n";
  os << "target_rtol " << m.target_rtol << "\n";
  os << "train";
  for (int i : m.train_indices) os << ' ' << i;
  os << "\nval";
  for (int i : m.val_indices) os << ' ' << i;
  os << "\nfiles:\n";
  for (int i = 0; i < m.count; ++i) {
    os << "R_" << i << ".pfld";
    if (m.has_targets) os << " phi_" << i << ".pfld";
    os << "\n";
  }
}

inline DatasetManifest load_manifest(const std::string& directory) {
  std::ifstream is(directory + "/manifest.txt");
  if (!is)
    throw std::runtime_error("load_manifest: no manifest.txt in " + directory);
  DatasetManifest m;
  m.directory = directory;
  int nx = 0, ny = 0;
  double Lx = 0, Ly = 0;
  Geometry geom = Geometry::cartesian;
  std::string line;
  while (std::getline(is, line)) {
    if (line == "files:") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") {
      std::string v;
      ls >> v;
      m.kind = v == "fourier" ? DatasetKind::fourier_N_p : DatasetKind::random_c;
    } else if (key == "count") ls >> m.count;
    else if (key == "nx") ls >> nx;
    else if (key == "ny") ls >> ny;
    else if (key == "Lx") ls >> Lx;
    else if (key == "Ly") ls >> Ly;
    else if (key == "geometry") {
      std::string v;
      ls >> v;
      geom = v == "axisymmetric" ? Geometry::axisymmetric : Geometry::cartesian;
    } else if (key == "c") ls >> m.c;
    else if (key == "N") ls >> m.N;
    else if (key == "p") ls >> m.p;
    else if (key == "seed") ls >> m.seed;
    else if (key == "normalization") ls >> m.normalization;
    else if (key == "targets") {
      int t = 0;
      ls >> t;
      m.has_targets = t != 0;
    } else if (key == "target_rtol") ls >> m.target_rtol;
    else if (key == "train") {
      int i;
      while (ls >> i) m.train_indices.push_back(i);
    } else if (key == "val") {
      int i;
      while (ls >> i) m.val_indices.push_back(i);
    }
  }
  m.grid = GridSpec(nx, ny, Lx, Ly, geom);
  // every listed file must exist and parse
  for (int i = 0; i < m.count; ++i) {
    read_field(m.charge_file(i));
    if (m.has_targets) read_field(m.target_file(i));
  }
  return m;
}

// Generates count (R, phi_target) pairs plus the manifest. Targets are
// cg solves at the requested tolerance; samples whose solve does not reach
// it are rejected (regenerated from a shifted stream).
inline DatasetManifest build_dataset(const DatasetRequest& req,
                                     TargetSolver target_solver,
                                     const std::string& directory,
                                     double target_rtol = 1e-10) {
  detail::require(req.count >= 1, "build_dataset: count >= 1");
  std::filesystem::create_directories(directory);
  DatasetManifest m;
  m.kind = req.kind;
  m.count = req.count;
  m.grid = req.grid;
  m.c = req.c;
  m.N = req.N;
  m.p = req.p;
  m.seed = req.seed;
  m.normalization = normalization_ratio(req.grid.Lx, req.grid.Ly, req.alpha);
  m.has_targets = target_solver != TargetSolver::none;
  m.target_rtol = m.has_targets ? target_rtol : 0.0;
  m.directory = directory;

  const bool cyl = req.grid.geometry == Geometry::axisymmetric;
  std::atomic<int> failed{0};
  parallel_for(0, req.count, [&](std::ptrdiff_t idx) {
    const int i = static_cast<int>(idx);
    // Non-converged target solves reject the sample; a shifted stream
    // regenerates it so indices stay dense.
    for (int attempt = 0;; ++attempt) {
      Rng rng = Rng::stream(req.seed,
                            static_cast<std::uint64_t>(i) +
                                static_cast<std::uint64_t>(req.count) * attempt);
      ScalarField R = req.kind == DatasetKind::random_c
                          ? gen_random(req.grid, req.c, rng, req.amplitude)
                          : gen_fourier(req.grid, req.N, req.p, rng,
                                        req.amplitude);
      if (!m.has_targets) {
        write_field(m.charge_file(i), R);
        break;
      }
      auto bc = cyl ? BoundarySpec::streamer(0.0) : BoundarySpec::dirichlet_zero();
      auto [phi, rep] = cg_solve(R, req.grid, bc, target_rtol, 200000,
                                 Preconditioner::diagonal);
      if (rep.residual <= target_rtol) {
        write_field(m.charge_file(i), R);
        write_field(m.target_file(i), phi);
        break;
      }
      if (attempt >= 4) {
        failed.fetch_add(1);
        break;
      }
    }
  });
  if (failed.load() > 0)
    throw std::runtime_error("build_dataset: " + std::to_string(failed.load()) +
                             " samples rejected for non-convergence");

  const int n_train =
      static_cast<int>(std::lround(req.train_fraction * req.count));
  for (int i = 0; i < req.count; ++i)
    (i < n_train ? m.train_indices : m.val_indices).push_back(i);
  write_manifest(m);
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation tables (§5.1): per-dataset and combined rows of
// norm_1(phi), norm_1(E), norm_inf(E) against the stored cg targets.
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string dataset;
  int count = 0;
  double phi_l1 = 0.0;
  double e_l1 = 0.0;
  double e_linf = 0.0;

  static std::string csv_header() { return "dataset,count,phi_l1,E_l1,E_linf"; }
  std::string csv_row() const {
    std::ostringstream os;
    os.precision(10);
    os << dataset << ',' << count << ',' << phi_l1 << ',' << e_l1 << ','
       << e_linf;
    return os.str();
  }
};

using Predictor = std::function<ScalarField(const ScalarField&)>;

inline std::vector<EvalRow> evaluate(const Predictor& predictor,
                                     const std::vector<DatasetManifest>& sets,
                                     double fallback_rtol = 1e-10) {
  std::vector<EvalRow> rows;
  EvalRow combined;
  combined.dataset = "combined";
  for (const auto& m : sets) {
    EvalRow row;
    row.dataset = m.name();
    row.count = m.count;
    for (int i = 0; i < m.count; ++i) {
      ScalarField R = read_field(m.charge_file(i));
      detail::require(R.grid == m.grid, "evaluate: sample/manifest grid mismatch");
      ScalarField target =
          m.has_targets
              ? read_field(m.target_file(i))
              : cg_solve(R, m.grid, BoundarySpec::dirichlet_zero(),
                         fallback_rtol, 200000, Preconditioner::diagonal)
                    .first;
      ScalarField pred = predictor(R);
      detail::require(pred.grid == m.grid, "evaluate: predictor grid mismatch");
      VectorField Ep = gradient_to_efield(pred);
      VectorField Et = gradient_to_efield(target);
      row.phi_l1 += norm_1(pred, target);
      row.e_l1 += norm_1(Ep, Et);
      row.e_linf = std::max(row.e_linf, norm_inf(Ep, Et));
    }
    row.phi_l1 /= m.count;
    row.e_l1 /= m.count;
    combined.count += row.count;
    combined.phi_l1 += row.phi_l1 * row.count;
    combined.e_l1 += row.e_l1 * row.count;
    combined.e_linf = std::max(combined.e_linf, row.e_linf);
    rows.push_back(row);
  }
  if (combined.count > 0) {
    combined.phi_l1 /= combined.count;
    combined.e_l1 /= combined.count;
  }
  rows.push_back(combined);
  return rows;
}

}  // namespace poisnet
