#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisnet/field.hpp"

namespace poisnet {

// Per-edge boundary condition. Dirichlet carries a value function of the
// node position; Neumann is homogeneous only.
struct EdgeCondition {
  enum class Kind { dirichlet, neumann_zero };
  Kind kind = Kind::dirichlet;
  std::function<double(double, double)> value;  // (x, y) -> phi, Dirichlet only

  static EdgeCondition dirichlet(double v = 0.0) {
    return {Kind::dirichlet, [v](double, double) { return v; }};
  }
  static EdgeCondition dirichlet(std::function<double(double, double)> f) {
    return {Kind::dirichlet, std::move(f)};
  }
  static EdgeCondition neumann() { return {Kind::neumann_zero, nullptr}; }
};

struct BoundarySpec {
  EdgeCondition left;    // i = 0
  EdgeCondition right;   // i = nx-1
  EdgeCondition bottom;  // j = 0 (the axis for axisymmetric grids)
  EdgeCondition top;     // j = ny-1

  static BoundarySpec dirichlet_zero() {
    return {EdgeCondition::dirichlet(), EdgeCondition::dirichlet(),
            EdgeCondition::dirichlet(), EdgeCondition::dirichlet()};
  }

  // The §7 setup: phi = -Ex*x on x = 0, x = Lx, r = Lr; zero normal
  // derivative at the axis.
  static BoundarySpec streamer(double Ex) {
    auto lift = [Ex](double x, double) { return -Ex * x; };
    return {EdgeCondition::dirichlet(lift), EdgeCondition::dirichlet(lift),
            EdgeCondition::neumann(), EdgeCondition::dirichlet(lift)};
  }

  bool any_dirichlet() const {
    return left.kind == EdgeCondition::Kind::dirichlet ||
           right.kind == EdgeCondition::Kind::dirichlet ||
           bottom.kind == EdgeCondition::Kind::dirichlet ||
           top.kind == EdgeCondition::Kind::dirichlet;
  }
};

struct SolveReport {
  std::string solver;
  int nodes = 0;
  double rtol = 0.0;
  int iterations = 0;
  double residual = 0.0;  // final relative residual
  double seconds = 0.0;

  std::string csv_row() const {
    std::ostringstream os;
    os << solver << ',' << nodes << ',' << rtol << ',' << iterations << ','
       << residual << ',' << seconds;
    return os.str();
  }
  static std::string csv_header() {
    return "solver,nodes,rtol,iterations,residual,seconds";
  }
};

enum class Preconditioner { none, diagonal };

// ---------------------------------------------------------------------------
// Matrix-free discretization of A = -laplacian with the boundary spec folded
// in. Dirichlet nodes are eliminated (their rows are identity against the
// lift); Neumann nodes stay unknowns with mirror or axis-limit stencils.
// With all-Dirichlet edges A is symmetric positive definite; axisymmetric
// operators are self-adjoint under the cell-volume inner product.
// ---------------------------------------------------------------------------
class PoissonProblem {
 public:
  PoissonProblem(const GridSpec& grid, BoundarySpec bc)
      : g_(grid), bc_(std::move(bc)) {
    detail::require(bc_.any_dirichlet(),
                    "PoissonProblem: at least one Dirichlet edge required");
    build_masks();
  }

  const GridSpec& grid() const { return g_; }

  bool is_unknown(int i, int j) const { return mask_[g_.idx(i, j)] != 0; }

  // Dirichlet extension: boundary values on Dirichlet nodes, zero elsewhere.
  ScalarField lift() const {
    ScalarField f(g_);
    for (int j = 0; j < g_.ny; ++j)
      for (int i = 0; i < g_.nx; ++i)
        if (!mask_[g_.idx(i, j)]) f(i, j) = dirichlet_value(i, j);
    return f;
  }

  // y = A x on unknown nodes; Dirichlet rows are zeroed. x values on
  // Dirichlet nodes take part in neighbor couplings (used by rhs assembly).
  ScalarField apply(const ScalarField& x) const {
    ScalarField y(g_);
    const double ax = 1.0 / (g_.dx() * g_.dx());
    const double dy = g_.dy();
    const double ay = 1.0 / (dy * dy);
    for (int j = 0; j < g_.ny; ++j) {
      for (int i = 0; i < g_.nx; ++i) {
        const int k = g_.idx(i, j);
        if (!mask_[k]) continue;
        // x-part with mirror at Neumann x-edges
        double sx;
        if (i == 0)
          sx = 2.0 * ax * (x(0, j) - x(1, j));
        else if (i == g_.nx - 1)
          sx = 2.0 * ax * (x(i, j) - x(i - 1, j));
        else
          sx = ax * (2.0 * x(i, j) - x(i - 1, j) - x(i + 1, j));
        // y-part
        double sy;
        if (g_.geometry == Geometry::cartesian) {
          if (j == 0)
            sy = 2.0 * ay * (x(i, 0) - x(i, 1));
          else if (j == g_.ny - 1)
            sy = 2.0 * ay * (x(i, j) - x(i, j - 1));
          else
            sy = ay * (2.0 * x(i, j) - x(i, j - 1) - x(i, j + 1));
        } else {
          if (j == 0) {
            sy = 4.0 * ay * (x(i, 0) - x(i, 1));  // axis limit
          } else if (j == g_.ny - 1) {
            const double r = g_.r(j);
            const double rm = (r - 0.5 * dy) / (0.5 * r);  // half outer cell
            sy = ay * rm * (x(i, j) - x(i, j - 1));
          } else {
            const double r = g_.r(j);
            const double rp = (r + 0.5 * dy) / r;
            const double rm = (r - 0.5 * dy) / r;
            sy = ay * (rm * (x(i, j) - x(i, j - 1)) +
                       rp * (x(i, j) - x(i, j + 1)));
          }
        }
        y.values[k] = sx + sy;
      }
    }
    return y;
  }

  ScalarField diagonal() const {
    ScalarField d(g_, 1.0);
    const double ax = 1.0 / (g_.dx() * g_.dx());
    const double dy = g_.dy();
    const double ay = 1.0 / (dy * dy);
    for (int j = 0; j < g_.ny; ++j) {
      for (int i = 0; i < g_.nx; ++i) {
        const int k = g_.idx(i, j);
        if (!mask_[k]) continue;
        const double sx = 2.0 * ax;  // mirror and interior diagonals coincide
        double sy;
        if (g_.geometry == Geometry::cartesian) {
          sy = (j == 0 || j == g_.ny - 1) ? 2.0 * ay : 2.0 * ay;
        } else {
          if (j == 0)
            sy = 4.0 * ay;
          else if (j == g_.ny - 1)
            sy = ay * (g_.r(j) - 0.5 * dy) / (0.5 * g_.r(j));
          else
            sy = 2.0 * ay;
        }
        d.values[k] = sx + sy;
      }
    }
    return d;
  }

  // Inner-product weight making A self-adjoint (cell volumes in r for
  // axisymmetric grids, 1 otherwise).
  double weight(int i, int j) const {
    double w = 1.0;
    if (g_.geometry == Geometry::axisymmetric) {
      const double dr = g_.dy();
      if (j == 0)
        w = dr * dr / 8.0;
      else if (j == g_.ny - 1)
        w = 0.5 * g_.r(j) * dr;
      else
        w = g_.r(j) * dr;
    }
    // Half weights for mirror (Neumann) x-edges keep the x-part symmetric.
    if (i == 0 && bc_.left.kind == EdgeCondition::Kind::neumann_zero) w *= 0.5;
    if (i == g_.nx - 1 && bc_.right.kind == EdgeCondition::Kind::neumann_zero)
      w *= 0.5;
    if (g_.geometry == Geometry::cartesian) {
      if (j == 0 && bc_.bottom.kind == EdgeCondition::Kind::neumann_zero)
        w *= 0.5;
      if (j == g_.ny - 1 && bc_.top.kind == EdgeCondition::Kind::neumann_zero)
        w *= 0.5;
    }
    return w;
  }

  // b = R + couplings of the Dirichlet lift, restricted to unknowns.
  ScalarField rhs(const ScalarField& R) const {
    ScalarField lifted = lift();
    ScalarField Al = apply(lifted);
    ScalarField b(g_);
    for (int k = 0; k < g_.size(); ++k)
      if (mask_[k]) b.values[k] = R.values[k] - Al.values[k];
    return b;
  }

  double dot(const ScalarField& u, const ScalarField& v) const {
    double s = 0.0;
    for (int j = 0; j < g_.ny; ++j)
      for (int i = 0; i < g_.nx; ++i) {
        const int k = g_.idx(i, j);
        if (mask_[k]) s += weight(i, j) * u.values[k] * v.values[k];
      }
    return s;
  }

  double dirichlet_value(int i, int j) const {
    const double x = g_.x(i), y = g_.y(j);
    // Corner priority is irrelevant for consistent data; left/right win.
    if (i == 0 && bc_.left.kind == EdgeCondition::Kind::dirichlet)
      return bc_.left.value(x, y);
    if (i == g_.nx - 1 && bc_.right.kind == EdgeCondition::Kind::dirichlet)
      return bc_.right.value(x, y);
    if (j == 0 && bc_.bottom.kind == EdgeCondition::Kind::dirichlet)
      return bc_.bottom.value(x, y);
    if (j == g_.ny - 1 && bc_.top.kind == EdgeCondition::Kind::dirichlet)
      return bc_.top.value(x, y);
    return 0.0;
  }

 private:
  void build_masks() {
    mask_.assign(g_.size(), 1);
    auto mark_dirichlet = [&](const EdgeCondition& e, auto&& nodes) {
      if (e.kind != EdgeCondition::Kind::dirichlet) return;
      nodes();
    };
    mark_dirichlet(bc_.left, [&] {
      for (int j = 0; j < g_.ny; ++j) mask_[g_.idx(0, j)] = 0;
    });
    mark_dirichlet(bc_.right, [&] {
      for (int j = 0; j < g_.ny; ++j) mask_[g_.idx(g_.nx - 1, j)] = 0;
    });
    mark_dirichlet(bc_.bottom, [&] {
      for (int i = 0; i < g_.nx; ++i) mask_[g_.idx(i, 0)] = 0;
    });
    mark_dirichlet(bc_.top, [&] {
      for (int i = 0; i < g_.nx; ++i) mask_[g_.idx(i, g_.ny - 1)] = 0;
    });
  }

  GridSpec g_;
  BoundarySpec bc_;
  std::vector<char> mask_;
};

// Spec-facing operator application: A*phi with Dirichlet rows zeroed.
inline ScalarField apply_operator(const GridSpec& grid, const BoundarySpec& bc,
                                  const ScalarField& phi) {
  return PoissonProblem(grid, bc).apply(phi);
}

namespace detail {
inline double l2(const PoissonProblem& p, const ScalarField& v) {
  return std::sqrt(p.dot(v, v));
}
}  // namespace detail

// Damped-free pointwise Jacobi iteration on the lifted system.
inline std::pair<ScalarField, SolveReport> jacobi_solve(
    const ScalarField& R, const GridSpec& grid, const BoundarySpec& bc,
    double rtol, int max_iter) {
  detail::require(rtol > 0.0 && rtol < 1.0, "jacobi_solve: rtol in (0, 1)");
  detail::require(max_iter > 0, "jacobi_solve: max_iter > 0");
  const auto t0 = std::chrono::steady_clock::now();
  PoissonProblem prob(grid, bc);
  SolveReport rep;
  rep.solver = "jacobi";
  rep.nodes = grid.size();
  rep.rtol = rtol;

  ScalarField b = prob.rhs(R);
  const double bnorm = detail::l2(prob, b);
  ScalarField u(grid);
  if (bnorm == 0.0) {
    ScalarField phi = prob.lift();
    rep.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0).count();
    return {phi, rep};
  }
  ScalarField diag = prob.diagonal();
  ScalarField r = prob.apply(u);
  for (int k = 0; k < grid.size(); ++k)
    r.values[k] = b.values[k] - r.values[k];
  rep.residual = detail::l2(prob, r) / bnorm;
  while (rep.iterations < max_iter && rep.residual > rtol) {
    for (int k = 0; k < grid.size(); ++k)
      u.values[k] += r.values[k] / diag.values[k];
    r = prob.apply(u);
    for (int k = 0; k < grid.size(); ++k)
      r.values[k] = b.values[k] - r.values[k];
    ++rep.iterations;
    rep.residual = detail::l2(prob, r) / bnorm;
  }
  ScalarField phi = prob.lift();
  phi += u;
  rep.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0).count();
  return {phi, rep};
}

// Preconditioned conjugate gradient on the lifted system, with the
// problem-specific (volume-weighted) inner product.
inline std::pair<ScalarField, SolveReport> cg_solve(
    const ScalarField& R, const GridSpec& grid, const BoundarySpec& bc,
    double rtol, int max_iter,
    Preconditioner precond = Preconditioner::none,
    const ScalarField* initial_guess = nullptr) {
  detail::require(rtol > 0.0 && rtol < 1.0, "cg_solve: rtol in (0, 1)");
  detail::require(max_iter > 0, "cg_solve: max_iter > 0");
  const auto t0 = std::chrono::steady_clock::now();
  PoissonProblem prob(grid, bc);
  SolveReport rep;
  rep.solver = precond == Preconditioner::diagonal ? "cg-diag" : "cg";
  rep.nodes = grid.size();
  rep.rtol = rtol;

  ScalarField b = prob.rhs(R);
  const double bnorm = detail::l2(prob, b);
  ScalarField u(grid);
  if (initial_guess) {
    // warm start: interior part of the guess relative to the lift
    ScalarField lifted = prob.lift();
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i)
        if (prob.is_unknown(i, j))
          u(i, j) = (*initial_guess)(i, j) - lifted(i, j);
  }
  if (bnorm == 0.0) {
    ScalarField phi = prob.lift();
    rep.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0).count();
    return {phi, rep};
  }

  ScalarField diag = prob.diagonal();
  auto precondition = [&](const ScalarField& r) {
    ScalarField z = r;
    if (precond == Preconditioner::diagonal)
      for (int k = 0; k < grid.size(); ++k) z.values[k] /= diag.values[k];
    return z;
  };

  ScalarField r = prob.apply(u);
  for (int k = 0; k < grid.size(); ++k)
    r.values[k] = b.values[k] - r.values[k];
  ScalarField z = precondition(r);
  ScalarField p = z;
  double rz = prob.dot(r, z);
  rep.residual = detail::l2(prob, r) / bnorm;

  for (int it = 1; it <= max_iter && rep.residual > rtol; ++it) {
    ScalarField Ap = prob.apply(p);
    const double pAp = prob.dot(p, Ap);
    if (pAp <= 0.0) break;  // loss of positive definiteness: stop honestly
    const double alpha = rz / pAp;
    for (int k = 0; k < grid.size(); ++k) {
      u.values[k] += alpha * p.values[k];
      r.values[k] -= alpha * Ap.values[k];
    }
    rep.iterations = it;
    rep.residual = detail::l2(prob, r) / bnorm;
    if (rep.residual <= rtol) break;
    z = precondition(r);
    const double rz_new = prob.dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int k = 0; k < grid.size(); ++k)
      p.values[k] = z.values[k] + beta * p.values[k];
  }

  ScalarField phi = prob.lift();
  phi += u;
  rep.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0).count();
  return {phi, rep};
}

// CG solution of the axisymmetric operator with r-weighted symmetrization;
// boundary data may carry nonzero Dirichlet values (handled by lifting).
inline std::pair<ScalarField, SolveReport> solve_cylindrical(
    const ScalarField& R, const GridSpec& grid, const BoundarySpec& bc,
    double rtol = 1e-10, int max_iter = 100000,
    const ScalarField* initial_guess = nullptr) {
  detail::require(grid.geometry == Geometry::axisymmetric,
                  "solve_cylindrical: axisymmetric grid required");
  return cg_solve(R, grid, bc, rtol, max_iter, Preconditioner::diagonal,
                  initial_guess);
}

}  // namespace poisnet
