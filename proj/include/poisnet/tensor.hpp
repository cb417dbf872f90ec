#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "poisnet/field.hpp"
#include "poisnet/parallel.hpp"

namespace poisnet {

// ---------------------------------------------------------------------------
// Dense float64 tensor, layout (batch, channels, height, width) row-major.
// Height indexes y (grid rows j), width indexes x (grid columns i).
// ---------------------------------------------------------------------------
struct TensorShape {
  int b = 0, c = 0, h = 0, w = 0;
  long count() const {
    return static_cast<long>(b) * c * h * w;
  }
  bool operator==(const TensorShape& o) const {
    return b == o.b && c == o.c && h == o.h && w == o.w;
  }
};

struct Tensor {
  TensorShape shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(TensorShape s, double fill = 0.0)
      : shape(s), v(static_cast<std::size_t>(s.count()), fill) {}
  Tensor(int b, int c, int h, int w, double fill = 0.0)
      : Tensor(TensorShape{b, c, h, w}, fill) {}

  double& at(int b, int c, int y, int x) {
    return v[((static_cast<std::size_t>(b) * shape.c + c) * shape.h + y) *
                 shape.w + x];
  }
  double at(int b, int c, int y, int x) const {
    return v[((static_cast<std::size_t>(b) * shape.c + c) * shape.h + y) *
                 shape.w + x];
  }
  double* plane(int b, int c) {
    return v.data() + (static_cast<std::size_t>(b) * shape.c + c) *
                          (static_cast<std::size_t>(shape.h) * shape.w);
  }
  const double* plane(int b, int c) const {
    return v.data() + (static_cast<std::size_t>(b) * shape.c + c) *
                          (static_cast<std::size_t>(shape.h) * shape.w);
  }
  bool finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Reverse-mode differentiation graph. Every op returns a new node holding
// its value, parents and a backward closure; backward() walks the graph in
// reverse topological order. Gradients accumulate in node.grad.
// ---------------------------------------------------------------------------
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool grad_ready = false;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backfn;

  void ensure_grad() {
    if (!grad_ready) {
      grad = Tensor(value.shape, 0.0);
      grad_ready = true;
    }
  }
  void zero_grad() {
    if (grad_ready)
      std::fill(grad.v.begin(), grad.v.end(), 0.0);
  }
};

inline Var make_leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

inline Var make_op(Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backfn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const Var& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backfn = std::move(backfn);
  return n;
}

// Seeds the root gradient (all-ones when omitted) and propagates.
inline void backward(const Var& root, const Tensor* seed = nullptr) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  if (seed) {
    if (!(seed->shape == root->value.shape))
      throw std::invalid_argument("backward: seed shape mismatch");
    root->grad = *seed;
  } else {
    std::fill(root->grad.v.begin(), root->grad.v.end(), 1.0);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backfn && (*it)->grad_ready) (*it)->backfn(**it);
}

// ---------------------------------------------------------------------------
// Convolution, stride 1, odd kernel, zero "same" padding.
// Weights (co, ci, kh, kw) ride in a Tensor with shape.b = co, shape.c = ci.
// ---------------------------------------------------------------------------

namespace tinsel {  // shifted-plane kernels shared by forward and backward

inline void axpy_shift(const double* in, double* out, int H, int W, int dy,
                       int dx, double wt) {
  const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
  const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
  for (int y = y0; y < y1; ++y) {
    const double* irow = in + (y + dy) * W + dx;
    double* orow = out + y * W;
    for (int x = x0; x < x1; ++x) orow[x] += wt * irow[x];
  }
}

inline double dot_shift(const double* a, const double* b, int H, int W, int dy,
                        int dx) {
  // sum over a(y, x) * b(y+dy, x+dx) where both in range
  const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
  const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
  double s = 0.0;
  for (int y = y0; y < y1; ++y) {
    const double* ar = a + y * W;
    const double* br = b + (y + dy) * W + dx;
    for (int x = x0; x < x1; ++x) s += ar[x] * br[x];
  }
  return s;
}

}  // namespace tinsel

inline Tensor conv2d_value(const Tensor& in, const Tensor& w,
                           const Tensor& bias) {
  const int B = in.shape.b, CI = in.shape.c, H = in.shape.h, W = in.shape.w;
  const int CO = w.shape.b, KH = w.shape.h, KW = w.shape.w;
  if (w.shape.c != CI) throw std::invalid_argument("conv2d: channel mismatch");
  if (KH % 2 == 0 || KW % 2 == 0)
    throw std::invalid_argument("conv2d: kernel sizes must be odd");
  if (bias.shape.count() != CO)
    throw std::invalid_argument("conv2d: bias size mismatch");
  Tensor out(B, CO, H, W);
  parallel_for(0, static_cast<std::ptrdiff_t>(B) * CO, [&](std::ptrdiff_t bc) {
    const int b = static_cast<int>(bc / CO);
    const int co = static_cast<int>(bc % CO);
    double* op = out.plane(b, co);
    const double bv = bias.v[co];
    for (long k = 0; k < static_cast<long>(H) * W; ++k) op[k] = bv;
    for (int ci = 0; ci < CI; ++ci) {
      const double* ip = in.plane(b, ci);
      for (int ky = 0; ky < KH; ++ky)
        for (int kx = 0; kx < KW; ++kx)
          tinsel::axpy_shift(ip, op, H, W, ky - KH / 2, kx - KW / 2,
                             w.at(co, ci, ky, kx));
    }
  });
  return out;
}

inline Var conv2d(const Var& in, const Var& w, const Var& bias) {
  Tensor out = conv2d_value(in->value, w->value, bias->value);
  Var vin = in, vw = w, vb = bias;
  return make_op(std::move(out), {in, w, bias}, [vin, vw, vb](Node& n) {
    const Tensor& g = n.grad;
    const int B = vin->value.shape.b, CI = vin->value.shape.c;
    const int H = vin->value.shape.h, W = vin->value.shape.w;
    const int CO = vw->value.shape.b;
    const int KH = vw->value.shape.h, KW = vw->value.shape.w;
    if (vin->requires_grad) {
      vin->ensure_grad();
      parallel_for(0, static_cast<std::ptrdiff_t>(B) * CI,
                   [&](std::ptrdiff_t bc) {
        const int b = static_cast<int>(bc / CI);
        const int ci = static_cast<int>(bc % CI);
        double* dip = vin->grad.plane(b, ci);
        for (int co = 0; co < CO; ++co) {
          const double* gp = g.plane(b, co);
          for (int ky = 0; ky < KH; ++ky)
            for (int kx = 0; kx < KW; ++kx)
              // transpose: flip the shift
              tinsel::axpy_shift(gp, dip, H, W, -(ky - KH / 2), -(kx - KW / 2),
                                 vw->value.at(co, ci, ky, kx));
        }
      });
    }
    if (vw->requires_grad) {
      vw->ensure_grad();
      parallel_for(0, CO, [&](std::ptrdiff_t co) {
        for (int b = 0; b < B; ++b) {
          const double* gp = g.plane(b, static_cast<int>(co));
          for (int ci = 0; ci < CI; ++ci) {
            const double* ip = vin->value.plane(b, ci);
            for (int ky = 0; ky < KH; ++ky)
              for (int kx = 0; kx < KW; ++kx)
                vw->grad.at(static_cast<int>(co), ci, ky, kx) +=
                    tinsel::dot_shift(gp, ip, H, W, ky - KH / 2, kx - KW / 2);
          }
        }
      });
    }
    if (vb->requires_grad) {
      vb->ensure_grad();
      for (int b = 0; b < B; ++b)
        for (int co = 0; co < CO; ++co) {
          const double* gp = g.plane(b, co);
          double s = 0.0;
          for (long k = 0; k < static_cast<long>(H) * W; ++k) s += gp[k];
          vb->grad.v[static_cast<std::size_t>(co)] += s;
        }
    }
  });
}

inline Var relu(const Var& in) {
  Tensor out = in->value;
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  Var vin = in;
  return make_op(std::move(out), {in}, [vin](Node& n) {
    if (!vin->requires_grad) return;
    vin->ensure_grad();
    for (std::size_t k = 0; k < n.grad.v.size(); ++k)
      if (vin->value.v[k] > 0.0) vin->grad.v[k] += n.grad.v[k];
  });
}

// 2x2 average pooling with floor semantics (odd trailing row/column dropped).
inline Var avgpool2(const Var& in) {
  const int B = in->value.shape.b, C = in->value.shape.c;
  const int H = in->value.shape.h, W = in->value.shape.w;
  const int OH = H / 2, OW = W / 2;
  if (OH < 1 || OW < 1) throw std::invalid_argument("avgpool2: input too small");
  Tensor out(B, C, OH, OW);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const double* ip = in->value.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < OH; ++y)
        for (int x = 0; x < OW; ++x)
          op[y * OW + x] = 0.25 * (ip[2 * y * W + 2 * x] +
                                   ip[2 * y * W + 2 * x + 1] +
                                   ip[(2 * y + 1) * W + 2 * x] +
                                   ip[(2 * y + 1) * W + 2 * x + 1]);
    }
  Var vin = in;
  return make_op(std::move(out), {in}, [vin, OH, OW, W](Node& n) {
    if (!vin->requires_grad) return;
    vin->ensure_grad();
    const int B = n.value.shape.b, C = n.value.shape.c;
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const double* gp = n.grad.plane(b, c);
        double* dp = vin->grad.plane(b, c);
        for (int y = 0; y < OH; ++y)
          for (int x = 0; x < OW; ++x) {
            const double q = 0.25 * gp[y * OW + x];
            dp[2 * y * W + 2 * x] += q;
            dp[2 * y * W + 2 * x + 1] += q;
            dp[(2 * y + 1) * W + 2 * x] += q;
            dp[(2 * y + 1) * W + 2 * x + 1] += q;
          }
      }
  });
}

// Lattice variant used by the receptive-field probe: keeps the even
// sublattice so rescaling adds no spread of its own.
inline Var subsample2(const Var& in) {
  const int B = in->value.shape.b, C = in->value.shape.c;
  const int H = in->value.shape.h, W = in->value.shape.w;
  const int OH = H / 2, OW = W / 2;
  Tensor out(B, C, OH, OW);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const double* ip = in->value.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < OH; ++y)
        for (int x = 0; x < OW; ++x) op[y * OW + x] = ip[2 * y * W + 2 * x];
    }
  Var vin = in;
  return make_op(std::move(out), {in}, [vin, OH, OW, W](Node& n) {
    if (!vin->requires_grad) return;
    vin->ensure_grad();
    for (int b = 0; b < n.value.shape.b; ++b)
      for (int c = 0; c < n.value.shape.c; ++c) {
        const double* gp = n.grad.plane(b, c);
        double* dp = vin->grad.plane(b, c);
        for (int y = 0; y < OH; ++y)
          for (int x = 0; x < OW; ++x)
            dp[2 * y * W + 2 * x] += gp[y * OW + x];
      }
  });
}

namespace tinsel {

struct LerpTable {
  std::vector<int> i0, i1;
  std::vector<double> w1;  // weight of i1; i0 gets 1 - w1
};

inline LerpTable lerp_table(int src, int dst) {
  LerpTable t;
  t.i0.resize(dst);
  t.i1.resize(dst);
  t.w1.resize(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int j0 = static_cast<int>(s);
    t.i0[i] = j0;
    t.i1[i] = std::min(j0 + 1, src - 1);
    t.w1[i] = s - j0;
  }
  return t;
}

}  // namespace tinsel

// Bilinear resize to an exact target size (handles odd chains like
// 101 -> 50 -> 101 against stored skip sizes).
inline Var upsample_bilinear(const Var& in, int th, int tw) {
  const int B = in->value.shape.b, C = in->value.shape.c;
  const int H = in->value.shape.h, W = in->value.shape.w;
  auto ty = tinsel::lerp_table(H, th);
  auto tx = tinsel::lerp_table(W, tw);
  Tensor out(B, C, th, tw);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const double* ip = in->value.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < th; ++y) {
        const double wy1 = ty.w1[y];
        const double* r0 = ip + ty.i0[y] * W;
        const double* r1 = ip + ty.i1[y] * W;
        for (int x = 0; x < tw; ++x) {
          const double wx1 = tx.w1[x];
          const double top = r0[tx.i0[x]] * (1.0 - wx1) + r0[tx.i1[x]] * wx1;
          const double bot = r1[tx.i0[x]] * (1.0 - wx1) + r1[tx.i1[x]] * wx1;
          op[y * tw + x] = top * (1.0 - wy1) + bot * wy1;
        }
      }
    }
  Var vin = in;
  return make_op(std::move(out), {in}, [vin, ty, tx, th, tw, W](Node& n) {
    if (!vin->requires_grad) return;
    vin->ensure_grad();
    for (int b = 0; b < n.value.shape.b; ++b)
      for (int c = 0; c < n.value.shape.c; ++c) {
        const double* gp = n.grad.plane(b, c);
        double* dp = vin->grad.plane(b, c);
        for (int y = 0; y < th; ++y) {
          const double wy1 = ty.w1[y];
          double* r0 = dp + ty.i0[y] * W;
          double* r1 = dp + ty.i1[y] * W;
          for (int x = 0; x < tw; ++x) {
            const double g = gp[y * tw + x];
            const double wx1 = tx.w1[x];
            r0[tx.i0[x]] += g * (1.0 - wx1) * (1.0 - wy1);
            r0[tx.i1[x]] += g * wx1 * (1.0 - wy1);
            r1[tx.i0[x]] += g * (1.0 - wx1) * wy1;
            r1[tx.i1[x]] += g * wx1 * wy1;
          }
        }
      }
  });
}

// Nearest-floor resize: probe-mode counterpart of upsample_bilinear.
inline Var upsample_nearest(const Var& in, int th, int tw) {
  const int B = in->value.shape.b, C = in->value.shape.c;
  const int H = in->value.shape.h, W = in->value.shape.w;
  Tensor out(B, C, th, tw);
  auto src = [](int i, int n) { return std::min(i / 2, n - 1); };
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const double* ip = in->value.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x)
          op[y * tw + x] = ip[src(y, H) * W + src(x, W)];
    }
  Var vin = in;
  return make_op(std::move(out), {in}, [vin, th, tw, H, W](Node& n) {
    if (!vin->requires_grad) return;
    vin->ensure_grad();
    auto src = [](int i, int m) { return std::min(i / 2, m - 1); };
    for (int b = 0; b < n.value.shape.b; ++b)
      for (int c = 0; c < n.value.shape.c; ++c) {
        const double* gp = n.grad.plane(b, c);
        double* dp = vin->grad.plane(b, c);
        for (int y = 0; y < th; ++y)
          for (int x = 0; x < tw; ++x)
            dp[src(y, H) * W + src(x, W)] += gp[y * tw + x];
      }
  });
}

inline Var concat_channels(const Var& a, const Var& b) {
  const TensorShape& sa = a->value.shape;
  const TensorShape& sb = b->value.shape;
  if (sa.b != sb.b || sa.h != sb.h || sa.w != sb.w)
    throw std::invalid_argument("concat_channels: spatial/batch mismatch");
  Tensor out(sa.b, sa.c + sb.c, sa.h, sa.w);
  const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
  for (int bb = 0; bb < sa.b; ++bb) {
    for (int c = 0; c < sa.c; ++c)
      std::copy_n(a->value.plane(bb, c), plane, out.plane(bb, c));
    for (int c = 0; c < sb.c; ++c)
      std::copy_n(b->value.plane(bb, c), plane, out.plane(bb, sa.c + c));
  }
  Var va = a, vb = b;
  return make_op(std::move(out), {a, b}, [va, vb, plane](Node& n) {
    const int ca = va->value.shape.c, cb = vb->value.shape.c;
    if (va->requires_grad) {
      va->ensure_grad();
      for (int bb = 0; bb < n.value.shape.b; ++bb)
        for (int c = 0; c < ca; ++c) {
          const double* gp = n.grad.plane(bb, c);
          double* dp = va->grad.plane(bb, c);
          for (std::size_t k = 0; k < plane; ++k) dp[k] += gp[k];
        }
    }
    if (vb->requires_grad) {
      vb->ensure_grad();
      for (int bb = 0; bb < n.value.shape.b; ++bb)
        for (int c = 0; c < cb; ++c) {
          const double* gp = n.grad.plane(bb, ca + c);
          double* dp = vb->grad.plane(bb, c);
          for (std::size_t k = 0; k < plane; ++k) dp[k] += gp[k];
        }
    }
  });
}

inline Var add(const Var& a, const Var& b) {
  if (!(a->value.shape == b->value.shape))
    throw std::invalid_argument("add: shape mismatch");
  Tensor out = a->value;
  for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] += b->value.v[k];
  Var va = a, vb = b;
  return make_op(std::move(out), {a, b}, [va, vb](Node& n) {
    for (Var v : {va, vb}) {
      if (!v->requires_grad) continue;
      v->ensure_grad();
      for (std::size_t k = 0; k < n.grad.v.size(); ++k)
        v->grad.v[k] += n.grad.v[k];
    }
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& x : out.v) x *= s;
  Var va = a;
  return make_op(std::move(out), {a}, [va, s](Node& n) {
    if (!va->requires_grad) return;
    va->ensure_grad();
    for (std::size_t k = 0; k < n.grad.v.size(); ++k)
      va->grad.v[k] += s * n.grad.v[k];
  });
}

}  // namespace poisnet
