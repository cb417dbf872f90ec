#pragma once

#include <cmath>
#include <stdexcept>

#include "poisnet/field.hpp"
#include "poisnet/tensor.hpp"

namespace poisnet {

// The four training objectives. Values follow the printed formulas exactly,
// including denominators; each is differentiable end to end. Tensors are
// (batch, 1, ny, nx) with height = j and width = i.

namespace lossdetail {

inline void check_phi(const Tensor& t) {
  if (t.shape.c != 1)
    throw std::invalid_argument("loss: potential tensor must have 1 channel");
  if (t.shape.h < 3 || t.shape.w < 3)
    throw std::invalid_argument("loss: grid too small");
}

inline Var scalar_node(double value, std::vector<Var> parents,
                       std::function<void(Node&)> backfn) {
  Tensor t(1, 1, 1, 1);
  t.v[0] = value;
  return make_op(std::move(t), std::move(parents), std::move(backfn));
}

}  // namespace lossdetail

// L_D = 1/(bs (2nx + 2ny - 4)) sum over boundary pixels of out^2.
inline Var loss_dirichlet(const Var& out) {
  lossdetail::check_phi(out->value);
  const int B = out->value.shape.b;
  const int ny = out->value.shape.h, nx = out->value.shape.w;
  const double pref = 1.0 / (static_cast<double>(B) * (2 * nx + 2 * ny - 4));
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    const double* p = out->value.plane(b, 0);
    for (int i = 0; i < nx; ++i) {
      acc += p[i] * p[i];
      acc += p[(ny - 1) * nx + i] * p[(ny - 1) * nx + i];
    }
    for (int j = 1; j < ny - 1; ++j) {
      acc += p[j * nx] * p[j * nx];
      acc += p[j * nx + nx - 1] * p[j * nx + nx - 1];
    }
  }
  Var vout = out;
  return lossdetail::scalar_node(pref * acc, {out}, [vout, pref](Node& n) {
    if (!vout->requires_grad) return;
    vout->ensure_grad();
    const double g = 2.0 * pref * n.grad.v[0];
    const int B = vout->value.shape.b;
    const int ny = vout->value.shape.h, nx = vout->value.shape.w;
    for (int b = 0; b < B; ++b) {
      const double* p = vout->value.plane(b, 0);
      double* d = vout->grad.plane(b, 0);
      for (int i = 0; i < nx; ++i) {
        d[i] += g * p[i];
        d[(ny - 1) * nx + i] += g * p[(ny - 1) * nx + i];
      }
      for (int j = 1; j < ny - 1; ++j) {
        d[j * nx] += g * p[j * nx];
        d[j * nx + nx - 1] += g * p[j * nx + nx - 1];
      }
    }
  });
}

// L_I = 1/(bs (nx-1)(ny-1)) sum over interior pixels of (out - target)^2.
inline Var loss_inside(const Var& out, const Tensor& target) {
  lossdetail::check_phi(out->value);
  if (!(target.shape == out->value.shape))
    throw std::invalid_argument("loss_inside: target shape mismatch");
  const int B = out->value.shape.b;
  const int ny = out->value.shape.h, nx = out->value.shape.w;
  const double pref =
      1.0 / (static_cast<double>(B) * (nx - 1) * (ny - 1));
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    const double* p = out->value.plane(b, 0);
    const double* t = target.plane(b, 0);
    for (int j = 1; j < ny - 1; ++j)
      for (int i = 1; i < nx - 1; ++i) {
        const double r = p[j * nx + i] - t[j * nx + i];
        acc += r * r;
      }
  }
  Var vout = out;
  Tensor tcopy = target;
  return lossdetail::scalar_node(
      pref * acc, {out}, [vout, pref, tcopy = std::move(tcopy)](Node& n) {
        if (!vout->requires_grad) return;
        vout->ensure_grad();
        const double g = 2.0 * pref * n.grad.v[0];
        const int B = vout->value.shape.b;
        const int ny = vout->value.shape.h, nx = vout->value.shape.w;
        for (int b = 0; b < B; ++b) {
          const double* p = vout->value.plane(b, 0);
          const double* t = tcopy.plane(b, 0);
          double* d = vout->grad.plane(b, 0);
          for (int j = 1; j < ny - 1; ++j)
            for (int i = 1; i < nx - 1; ++i)
              d[j * nx + i] += g * (p[j * nx + i] - t[j * nx + i]);
        }
      });
}

// L_L = Lx^2 Ly^2/(bs (nx-1)(ny-1)) sum over stencil nodes of
// (laplacian(out) + R)^2, with the grid's discrete laplacian (cartesian
// 5-point, or the conservative axisymmetric stencil with the regularized
// axis row). Gradient is the transpose stencil applied to the residual.
inline Var loss_laplacian(const Var& out, const Tensor& R_in,
                          const GridSpec& grid) {
  lossdetail::check_phi(out->value);
  if (!(R_in.shape == out->value.shape))
    throw std::invalid_argument("loss_laplacian: R shape mismatch");
  if (out->value.shape.h != grid.ny || out->value.shape.w != grid.nx)
    throw std::invalid_argument("loss_laplacian: tensor/grid size mismatch");
  const int B = out->value.shape.b;
  const int ny = grid.ny, nx = grid.nx;
  const double pref = grid.Lx * grid.Lx * grid.Ly * grid.Ly /
                      (static_cast<double>(B) * (nx - 1) * (ny - 1));
  const bool cyl = grid.geometry == Geometry::axisymmetric;
  const double ax = 1.0 / (grid.dx() * grid.dx());
  const double dy = grid.dy();
  const double ay = 1.0 / (dy * dy);

  // residual per batch plane; reused by the backward closure
  auto residual_at = [=, &grid](const double* p, const double* r, int i,
                                int j) {
    double lap;
    if (!cyl) {
      lap = ax * (p[j * nx + i - 1] - 2.0 * p[j * nx + i] + p[j * nx + i + 1]) +
            ay * (p[(j - 1) * nx + i] - 2.0 * p[j * nx + i] +
                  p[(j + 1) * nx + i]);
    } else if (j == 0) {
      lap = 4.0 * ay * (p[nx + i] - p[i]) +
            ax * (p[i - 1] - 2.0 * p[i] + p[i + 1]);
    } else {
      const double rr = grid.r(j);
      const double rp = (rr + 0.5 * dy) / rr;
      const double rm = (rr - 0.5 * dy) / rr;
      lap = ay * (rp * (p[(j + 1) * nx + i] - p[j * nx + i]) -
                  rm * (p[j * nx + i] - p[(j - 1) * nx + i])) +
            ax * (p[j * nx + i - 1] - 2.0 * p[j * nx + i] + p[j * nx + i + 1]);
    }
    return lap + r[j * nx + i];
  };

  const int j_lo = cyl ? 0 : 1;
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    const double* p = out->value.plane(b, 0);
    const double* r = R_in.plane(b, 0);
    for (int j = j_lo; j < ny - 1; ++j)
      for (int i = 1; i < nx - 1; ++i) {
        const double res = residual_at(p, r, i, j);
        acc += res * res;
      }
  }

  Var vout = out;
  Tensor Rcopy = R_in;
  GridSpec gcopy = grid;
  return lossdetail::scalar_node(
      pref * acc, {out},
      [vout, pref, residual_at, j_lo, cyl, ax, ay, dy, gcopy,
       Rcopy = std::move(Rcopy)](Node& n) {
        if (!vout->requires_grad) return;
        vout->ensure_grad();
        const double gscale = 2.0 * pref * n.grad.v[0];
        const int B = vout->value.shape.b;
        const int ny = gcopy.ny, nx = gcopy.nx;
        for (int b = 0; b < B; ++b) {
          const double* p = vout->value.plane(b, 0);
          const double* r = Rcopy.plane(b, 0);
          double* d = vout->grad.plane(b, 0);
          for (int j = j_lo; j < ny - 1; ++j)
            for (int i = 1; i < nx - 1; ++i) {
              const double q = gscale * residual_at(p, r, i, j);
              // scatter the stencil row into the gradient (transpose)
              if (!cyl) {
                d[j * nx + i - 1] += q * ax;
                d[j * nx + i + 1] += q * ax;
                d[(j - 1) * nx + i] += q * ay;
                d[(j + 1) * nx + i] += q * ay;
                d[j * nx + i] -= 2.0 * q * (ax + ay);
              } else if (j == 0) {
                d[nx + i] += q * 4.0 * ay;
                d[i] -= q * 4.0 * ay;
                d[i - 1] += q * ax;
                d[i + 1] += q * ax;
                d[i] -= 2.0 * q * ax;
              } else {
                const double rr = gcopy.r(j);
                const double rp = (rr + 0.5 * dy) / rr;
                const double rm = (rr - 0.5 * dy) / rr;
                d[(j + 1) * nx + i] += q * ay * rp;
                d[(j - 1) * nx + i] += q * ay * rm;
                d[j * nx + i] -= q * ay * (rp + rm);
                d[j * nx + i - 1] += q * ax;
                d[j * nx + i + 1] += q * ax;
                d[j * nx + i] -= 2.0 * q * ax;
              }
            }
        }
      });
}

// L_N = 1/(bs (nx-2)) sum over the axis row (j = 0, interior i) of
// (dphi/dr)^2, with the second-order one-sided difference
// (-3 phi_0 + 4 phi_1 - phi_2) / (2 dr) — zero for even quadratic profiles.
inline Var loss_neumann(const Var& out, const GridSpec& grid) {
  lossdetail::check_phi(out->value);
  if (out->value.shape.h != grid.ny || out->value.shape.w != grid.nx)
    throw std::invalid_argument("loss_neumann: tensor/grid size mismatch");
  const int B = out->value.shape.b;
  const int nx = grid.nx;
  const double inv2dr = 1.0 / (2.0 * grid.dy());
  const double pref = 1.0 / (static_cast<double>(B) * (nx - 2));
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    const double* p = out->value.plane(b, 0);
    for (int i = 1; i < nx - 1; ++i) {
      const double g =
          (-3.0 * p[i] + 4.0 * p[nx + i] - p[2 * nx + i]) * inv2dr;
      acc += g * g;
    }
  }
  Var vout = out;
  return lossdetail::scalar_node(
      pref * acc, {out}, [vout, pref, inv2dr](Node& n) {
        if (!vout->requires_grad) return;
        vout->ensure_grad();
        const double gs = 2.0 * pref * n.grad.v[0];
        const int B = vout->value.shape.b;
        const int nx = vout->value.shape.w;
        for (int b = 0; b < B; ++b) {
          const double* p = vout->value.plane(b, 0);
          double* d = vout->grad.plane(b, 0);
          for (int i = 1; i < nx - 1; ++i) {
            const double g =
                (-3.0 * p[i] + 4.0 * p[nx + i] - p[2 * nx + i]) * inv2dr;
            const double q = gs * g * inv2dr;
            d[i] += q * -3.0;
            d[nx + i] += q * 4.0;
            d[2 * nx + i] += q * -1.0;
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Field <-> tensor conversion
// ---------------------------------------------------------------------------

inline Tensor tensor_from_field(const ScalarField& f) {
  Tensor t(1, 1, f.grid.ny, f.grid.nx);
  std::copy(f.values.begin(), f.values.end(), t.v.begin());
  return t;
}

inline ScalarField field_from_tensor(const Tensor& t, const GridSpec& g,
                                     int batch = 0) {
  if (t.shape.h != g.ny || t.shape.w != g.nx)
    throw std::invalid_argument("field_from_tensor: size mismatch");
  ScalarField f(g);
  const double* p = t.plane(batch, 0);
  std::copy(p, p + g.size(), f.values.begin());
  return f;
}

}  // namespace poisnet
