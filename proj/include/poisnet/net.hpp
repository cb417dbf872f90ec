#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "poisnet/analytic.hpp"
#include "poisnet/dataset.hpp"
#include "poisnet/field.hpp"
#include "poisnet/losses.hpp"
#include "poisnet/rng.hpp"
#include "poisnet/tensor.hpp"

namespace poisnet {

enum class Arch { unet, msnet };

// Architecture description. depths[b] counts all convolutional layers at
// branch b along the input-to-output path (for UNet: encoder plus decoder
// at that scale; the deepest branch is the bottleneck).
struct NetConfig {
  Arch arch = Arch::unet;
  int n_b = 3;
  std::vector<int> depths;
  int ksx = 3;  // kernel extent along x (tensor width)
  int ksy = 3;  // kernel extent along y (tensor height)
  int width = 16;        // base channel count
  long budget = 0;       // parameter target; > 0 lets the builder tune width

  void validate() const {
    detail::require(n_b >= 1, "NetConfig: n_b >= 1");
    detail::require(static_cast<int>(depths.size()) == n_b,
                    "NetConfig: len(depths) must equal n_b");
    detail::require(ksx % 2 == 1 && ksx >= 3 && ksy % 2 == 1 && ksy >= 3,
                    "NetConfig: kernel sizes odd and >= 3");
    for (int d : depths)
      detail::require(d >= 1, "NetConfig: every branch needs >= 1 layer");
  }
  int global_depth() const {
    return std::accumulate(depths.begin(), depths.end(), 0);
  }
};

// ---------------------------------------------------------------------------
// Receptive-field calculus:
//   RF = sum_b RF_b,   RF_b = d_b (k_s - 1) 2^b   (+1 for the input pixel
//   carried by branch 0). Rectangular kernels give one RF per axis.
// ---------------------------------------------------------------------------
struct RfBreakdown {
  int x = 0, y = 0;
  std::vector<int> branch_x, branch_y;
};

inline RfBreakdown receptive_field(const NetConfig& cfg) {
  cfg.validate();
  RfBreakdown rf;
  for (int b = 0; b < cfg.n_b; ++b) {
    const int fx = cfg.depths[b] * (cfg.ksx - 1) * (1 << b);
    const int fy = cfg.depths[b] * (cfg.ksy - 1) * (1 << b);
    rf.branch_x.push_back(b == 0 ? 1 + fx : fx);
    rf.branch_y.push_back(b == 0 ? 1 + fy : fy);
    rf.x += rf.branch_x.back();
    rf.y += rf.branch_y.back();
  }
  return rf;
}

// RF = 2 n_p and n_b = max{ b | floor(n_p / 2^b) > k_s } + 1.
inline std::pair<int, int> optimal_params(int n_p, int k_s) {
  detail::require(n_p > k_s, "optimal_params: n_p must exceed k_s");
  int b = 0;
  while (n_p / (1 << (b + 1)) > k_s) ++b;
  return {2 * n_p, b + 1};
}

// Depth allocation for a nominal RF target: the coarsest branch takes half
// the remaining budget (floored to its per-layer quantum), finer branches
// repeat on the remainder.
inline std::vector<int> depths_for_rf(int n_b, int k_s, int target_rf) {
  detail::require(n_b >= 1 && k_s >= 3 && target_rf >= 1,
                  "depths_for_rf: bad arguments");
  std::vector<int> d(n_b, 1);
  double remaining = target_rf;
  for (int b = n_b - 1; b >= 1; --b) {
    const int quantum = (k_s - 1) * (1 << b);
    d[b] = std::max(1, static_cast<int>(std::floor(0.5 * remaining / quantum)));
    remaining -= static_cast<double>(d[b]) * quantum;
  }
  d[0] = std::max(
      1, static_cast<int>(std::llround((remaining - 1.0) / (k_s - 1))));
  return d;
}

namespace netdetail {

// Parity chain for exact probe footprints: backtracking a centered interval
// through the upsample at scale s keeps the formula's width only when the
// accumulated extent entering the split is even. e_0 = 2 f_0, then
// e_s = e_{s-1}/2 + 2 f_s, for splits s = 0 .. n-2.
inline bool chain_valid(const std::vector<int>& f, int n_b, int* first_bad) {
  long e = 2L * f[0];
  for (int s = 0; s <= n_b - 2; ++s) {
    if (e % 2 != 0) {
      if (first_bad) *first_bad = s;
      return false;
    }
    if (s + 1 < static_cast<int>(f.size())) e = e / 2 + 2L * f[s + 1];
  }
  return true;
}

// Snap depths (MSNet) or decoder depths (UNet) onto the parity chain.
// Bumping the depth feeding split s-1 flips the parity seen at split s.
inline bool fix_chain(std::vector<int>& f, int n_b,
                      const std::vector<int>* upper_bound) {
  for (int pass = 0; pass < 64; ++pass) {
    int bad = -1;
    if (chain_valid(f, n_b, &bad)) return true;
    const int t = bad - 1;
    if (t < 0) return false;
    if (upper_bound) {
      // prefer shrinking the decoder so scale-0 keeps encoder layers
      if (f[t] - 1 >= 0) --f[t];
      else if (f[t] + 1 <= (*upper_bound)[t]) ++f[t];
      else return false;
    } else {
      ++f[t];
    }
  }
  return false;
}

}  // namespace netdetail

// ---------------------------------------------------------------------------
// Network: weight tensors plus the structural layout needed to rebuild the
// forward graph. A trained instance is immutable during inference.
// ---------------------------------------------------------------------------
struct Network {
  struct Layer {
    Var w;  // (cout, cin, ky, kx)
    Var b;  // (cout)
    int cin = 0, cout = 0, ky = 0, kx = 0;
    bool output = false;  // linear (no activation)
  };

  NetConfig config;
  std::vector<int> enc_depth, dec_depth;  // UNet split; empty for MSNet
  std::vector<Layer> layers;              // declaration order
  // per-role layer indices
  std::vector<std::vector<int>> enc_idx, dec_idx, stack_idx;
  std::vector<int> bott_idx;
  int final_idx = -1;
  bool warn_small_scale = false;  // coarsest image <= kernel size

  // inference metadata
  double norm_ratio = 0.0;
  double delta_nn = 0.0;
  GridSpec trained_grid;

  long parameter_count() const {
    long n = 0;
    for (const auto& l : layers)
      n += static_cast<long>(l.cout) * l.cin * l.ky * l.kx + l.cout;
    return n;
  }

  void zero_grad() {
    for (auto& l : layers) {
      l.w->zero_grad();
      l.b->zero_grad();
    }
  }

  // One conv application; probe mode replaces the weights by their floored
  // magnitudes, drops biases and the nonlinearity.
  Var apply_layer(const Layer& l, const Var& x, bool probe) const {
    if (!probe) {
      Var y = conv2d(x, l.w, l.b);
      return l.output ? y : relu(y);
    }
    Tensor wpos = l.w->value;
    for (double& v : wpos.v) v = std::max(std::abs(v), 1e-3);
    Var pw = make_leaf(std::move(wpos), false);
    Var pb = make_leaf(Tensor(TensorShape{l.cout, 1, 1, 1}), false);
    return conv2d(x, pw, pb);
  }

  Var forward(const Var& input, bool probe = false) const {
    auto down = [&](const Var& x) { return probe ? subsample2(x) : avgpool2(x); };
    auto up = [&](const Var& x, int th, int tw) {
      return probe ? upsample_nearest(x, th, tw) : upsample_bilinear(x, th, tw);
    };
    auto run = [&](const std::vector<int>& idx, Var x) {
      for (int li : idx) x = apply_layer(layers[li], x, probe);
      return x;
    };

    if (config.arch == Arch::unet) {
      std::vector<Var> skips;
      Var cur = input;
      for (int b = 0; b < config.n_b - 1; ++b) {
        cur = run(enc_idx[b], cur);
        skips.push_back(cur);
        cur = down(cur);
      }
      cur = run(bott_idx, cur);
      for (int b = config.n_b - 2; b >= 0; --b) {
        cur = up(cur, skips[b]->value.shape.h, skips[b]->value.shape.w);
        cur = concat_channels(skips[b], cur);
        cur = run(dec_idx[b], cur);
      }
      return apply_layer(layers[final_idx], cur, probe);
    }

    // MSNet: coarse-to-fine chain, each scale compacted to one feature map.
    std::vector<Var> pooled{input};
    for (int b = 1; b < config.n_b; ++b) pooled.push_back(down(pooled[b - 1]));
    Var cur = run(stack_idx[config.n_b - 1], pooled[config.n_b - 1]);
    for (int b = config.n_b - 2; b >= 0; --b) {
      Var u = up(cur, pooled[b]->value.shape.h, pooled[b]->value.shape.w);
      cur = run(stack_idx[b], concat_channels(pooled[b], u));
    }
    return cur;
  }
};

// ---------------------------------------------------------------------------
// Builder
// ---------------------------------------------------------------------------

namespace netdetail {

struct LayerSpec {
  int cin, cout, ky, kx;
  bool output;
};

// Enumerates layer shapes for a given base width; shared by the parameter
// counter and the actual builder so the two cannot drift.
inline void enumerate_layers(const NetConfig& cfg,
                             const std::vector<int>& enc,
                             const std::vector<int>& dec,
                             int width,
                             std::vector<LayerSpec>& out,
                             std::vector<std::vector<int>>* enc_idx,
                             std::vector<std::vector<int>>* dec_idx,
                             std::vector<std::vector<int>>* stack_idx,
                             std::vector<int>* bott_idx, int* final_idx) {
  out.clear();
  bott_idx->clear();
  *final_idx = -1;
  auto push = [&](int cin, int cout, bool output_layer, int ky, int kx) {
    out.push_back({cin, cout, ky, kx, output_layer});
    return static_cast<int>(out.size()) - 1;
  };
  const int n = cfg.n_b;
  if (cfg.arch == Arch::unet) {
    enc_idx->assign(n, {});
    dec_idx->assign(n, {});
    int ch = 1;
    std::vector<int> skip_ch(n, 0);
    for (int b = 0; b < n - 1; ++b) {
      for (int l = 0; l < enc[b]; ++l) {
        (*enc_idx)[b].push_back(push(ch, width, false, cfg.ksy, cfg.ksx));
        ch = width;
      }
      skip_ch[b] = ch;
    }
    for (int l = 0; l < (n >= 1 ? cfg.depths[n - 1] : 0); ++l) {
      bott_idx->push_back(push(ch, width, false, cfg.ksy, cfg.ksx));
      ch = width;
    }
    for (int b = n - 2; b >= 0; --b) {
      ch += skip_ch[b];
      for (int l = 0; l < dec[b]; ++l) {
        (*dec_idx)[b].push_back(push(ch, width, false, cfg.ksy, cfg.ksx));
        ch = width;
      }
    }
    *final_idx = push(ch, 1, true, 1, 1);
  } else {
    stack_idx->assign(n, {});
    for (int b = n - 1; b >= 0; --b) {
      int ch = (b == n - 1) ? 1 : 2;
      const int d = cfg.depths[b];
      for (int l = 0; l < d; ++l) {
        const int cout = (l == d - 1) ? 1 : width;
        const bool is_out = (l == d - 1);  // compaction/output layers linear
        (*stack_idx)[b].push_back(push(ch, cout, is_out, cfg.ksy, cfg.ksx));
        ch = cout;
      }
    }
  }
}

inline long count_params(const std::vector<LayerSpec>& specs) {
  long total = 0;
  for (const auto& s : specs)
    total += static_cast<long>(s.cout) * s.cin * s.ky * s.kx + s.cout;
  return total;
}

}  // namespace netdetail

// Builds the network for an input grid: splits UNet depths into a
// parity-valid encoder/decoder layout, tunes the channel width to the
// parameter budget and seeds variance-scaled uniform weights (fan-in).
inline Network build_network(const NetConfig& config, const GridSpec& grid,
                             std::uint64_t seed = 1) {
  NetConfig cfg = config;
  cfg.validate();
  Network net;

  std::vector<int> enc, dec;
  if (cfg.arch == Arch::unet) {
    dec.assign(cfg.n_b, 0);
    enc.assign(cfg.n_b, 0);
    for (int b = 0; b < cfg.n_b - 1; ++b) dec[b] = cfg.depths[b] / 2;
    std::vector<int> bound(cfg.depths.begin(), cfg.depths.end());
    if (!netdetail::fix_chain(dec, cfg.n_b, &bound))
      std::fill(dec.begin(), dec.end(), 0);  // all-encoder layout, always exact
    for (int b = 0; b < cfg.n_b; ++b) enc[b] = cfg.depths[b] - dec[b];
    enc[cfg.n_b - 1] = cfg.depths[cfg.n_b - 1];
    dec[cfg.n_b - 1] = 0;
  } else {
    // MSNet depths themselves ride the chain; snap the config copy.
    netdetail::fix_chain(cfg.depths, cfg.n_b, nullptr);
  }

  auto enumerate = [&](int width, std::vector<netdetail::LayerSpec>& specs) {
    std::vector<std::vector<int>> ei, di, si;
    std::vector<int> bi;
    int fi = -1;
    netdetail::enumerate_layers(cfg, enc, dec, width, specs, &ei, &di, &si,
                                &bi, &fi);
  };

  int width = cfg.width;
  if (cfg.budget > 0) {
    // parameter count grows monotonically with width
    int lo = 1, hi = 4096;
    std::vector<netdetail::LayerSpec> specs;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      enumerate(mid, specs);
      if (netdetail::count_params(specs) <= cfg.budget) lo = mid;
      else hi = mid - 1;
    }
    enumerate(lo, specs);
    const long below = std::labs(netdetail::count_params(specs) - cfg.budget);
    enumerate(lo + 1, specs);
    const long above = std::labs(netdetail::count_params(specs) - cfg.budget);
    width = (below <= above) ? lo : lo + 1;
  }
  cfg.width = width;

  std::vector<netdetail::LayerSpec> specs;
  netdetail::enumerate_layers(cfg, enc, dec, width, specs, &net.enc_idx,
                              &net.dec_idx, &net.stack_idx, &net.bott_idx,
                              &net.final_idx);

  Rng rng(seed);
  for (const auto& s : specs) {
    Network::Layer l;
    l.cin = s.cin;
    l.cout = s.cout;
    l.ky = s.ky;
    l.kx = s.kx;
    l.output = s.output;
    Tensor w(TensorShape{s.cout, s.cin, s.ky, s.kx});
    const double limit = std::sqrt(6.0 / (static_cast<double>(s.cin) * s.ky * s.kx));
    for (double& v : w.v) v = rng.uniform(-limit, limit);
    l.w = make_leaf(std::move(w), true);
    l.b = make_leaf(Tensor(TensorShape{s.cout, 1, 1, 1}), true);
    net.layers.push_back(std::move(l));
  }

  net.config = cfg;
  net.enc_depth = enc;
  net.dec_depth = dec;
  net.trained_grid = grid;
  net.delta_nn = grid.dx();
  net.norm_ratio = normalization_ratio(grid.Lx, grid.Ly);
  // §5.4 degradation flag: the coarsest image must exceed the kernel
  const int coarsest =
      std::min(grid.nx, grid.ny) / (1 << (cfg.n_b - 1));
  net.warn_small_scale = coarsest <= std::max(cfg.ksx, cfg.ksy);
  return net;
}

// ---------------------------------------------------------------------------
// Measured receptive field: unit gradient at the output center in probe
// mode, bounding box of the nonzero input gradient (clipped by image size).
// ---------------------------------------------------------------------------
struct MeasuredRf {
  int x = 0, y = 0;
};

inline MeasuredRf empirical_rf(const Network& net, int probe_ny, int probe_nx) {
  Var input = make_leaf(Tensor(1, 1, probe_ny, probe_nx), true);
  Var out = net.forward(input, /*probe=*/true);
  Tensor seed(out->value.shape);
  seed.at(0, 0, out->value.shape.h / 2, out->value.shape.w / 2) = 1.0;
  backward(out, &seed);
  const Tensor& g = input->grad;
  int x0 = probe_nx, x1 = -1, y0 = probe_ny, y1 = -1;
  for (int y = 0; y < probe_ny; ++y)
    for (int x = 0; x < probe_nx; ++x)
      if (g.at(0, 0, y, x) != 0.0) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {0, 0};
  return {x1 - x0 + 1, y1 - y0 + 1};
}

inline MeasuredRf empirical_rf(const Network& net, int probe_n) {
  return empirical_rf(net, probe_n, probe_n);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: magic "PNET1", structured text block, then per-layer
// little-endian f64 weight/bias arrays in declaration order.
// ---------------------------------------------------------------------------

inline void save_network(const std::string& path, const Network& net) {
  std::ostringstream hdr;
  hdr.precision(17);
  hdr << "arch " << (net.config.arch == Arch::unet ? "unet" : "msnet") << "\n";
  hdr << "n_b " << net.config.n_b << "\n";
  hdr << "depths";
  for (int d : net.config.depths) hdr << ' ' << d;
  hdr << "\nenc";
  for (int d : net.enc_depth) hdr << ' ' << d;
  hdr << "\ndec";
  for (int d : net.dec_depth) hdr << ' ' << d;
  hdr << "\nksx " << net.config.ksx << "\nksy " << net.config.ksy << "\n";
  hdr << "width " << net.config.width << "\n";
  hdr << "budget " << net.config.budget << "\n";
  hdr << "norm_ratio " << net.norm_ratio << "\n";
  hdr << "delta_nn " << net.delta_nn << "\n";
  hdr << "trained " << net.trained_grid.nx << ' ' << net.trained_grid.ny << ' '
      << net.trained_grid.Lx << ' ' << net.trained_grid.Ly << ' '
      << (net.trained_grid.geometry == Geometry::cartesian ? 0 : 1) << "\n";
  const std::string text = hdr.str();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_network: cannot open " + path);
  os.write("PNET1", 5);
  const std::uint32_t len = static_cast<std::uint32_t>(text.size());
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(text.data(), text.size());
  for (const auto& l : net.layers) {
    os.write(reinterpret_cast<const char*>(l.w->value.v.data()),
             static_cast<std::streamsize>(l.w->value.v.size() * 8));
    os.write(reinterpret_cast<const char*>(l.b->value.v.data()),
             static_cast<std::streamsize>(l.b->value.v.size() * 8));
  }
  if (!os) throw std::runtime_error("save_network: write failed");
}

inline Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_network: cannot open " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "PNET1", 5) != 0)
    throw std::runtime_error("load_network: bad magic in " + path);
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 4);
  std::string text(len, '\0');
  is.read(text.data(), len);

  NetConfig cfg;
  std::vector<int> enc, dec;
  double norm_ratio = 0, delta_nn = 0;
  int tnx = 0, tny = 0, tgeom = 0;
  double tLx = 0, tLy = 0;
  std::istringstream hs(text);
  std::string line;
  while (std::getline(hs, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "arch") {
      std::string v;
      ls >> v;
      cfg.arch = v == "msnet" ? Arch::msnet : Arch::unet;
    } else if (key == "n_b") ls >> cfg.n_b;
    else if (key == "depths") {
      cfg.depths.clear();
      int d;
      while (ls >> d) cfg.depths.push_back(d);
    } else if (key == "enc") {
      int d;
      while (ls >> d) enc.push_back(d);
    } else if (key == "dec") {
      int d;
      while (ls >> d) dec.push_back(d);
    } else if (key == "ksx") ls >> cfg.ksx;
    else if (key == "ksy") ls >> cfg.ksy;
    else if (key == "width") ls >> cfg.width;
    else if (key == "budget") ls >> cfg.budget;
    else if (key == "norm_ratio") ls >> norm_ratio;
    else if (key == "delta_nn") ls >> delta_nn;
    else if (key == "trained") ls >> tnx >> tny >> tLx >> tLy >> tgeom;
  }

  GridSpec grid(tnx, tny, tLx, tLy,
                tgeom == 0 ? Geometry::cartesian : Geometry::axisymmetric);
  Network net = build_network(cfg, grid);
  net.enc_depth = enc;
  net.dec_depth = dec;
  net.norm_ratio = norm_ratio;
  net.delta_nn = delta_nn;
  // rebuild layout with the stored split (fix_chain may evolve): re-enumerate
  std::vector<netdetail::LayerSpec> specs;
  netdetail::enumerate_layers(net.config, enc, dec, net.config.width, specs,
                              &net.enc_idx, &net.dec_idx, &net.stack_idx,
                              &net.bott_idx, &net.final_idx);
  net.layers.clear();
  for (const auto& s : specs) {
    Network::Layer l;
    l.cin = s.cin;
    l.cout = s.cout;
    l.ky = s.ky;
    l.kx = s.kx;
    l.output = s.output;
    Tensor w(TensorShape{s.cout, s.cin, s.ky, s.kx});
    is.read(reinterpret_cast<char*>(w.v.data()),
            static_cast<std::streamsize>(w.v.size() * 8));
    Tensor b(TensorShape{s.cout, 1, 1, 1});
    is.read(reinterpret_cast<char*>(b.v.data()),
            static_cast<std::streamsize>(b.v.size() * 8));
    l.w = make_leaf(std::move(w), true);
    l.b = make_leaf(std::move(b), true);
    net.layers.push_back(std::move(l));
  }
  if (!is) throw std::runtime_error("load_network: truncated checkpoint");
  return net;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct LossWeights {
  double dirichlet = 1.0;
  double inside = 0.0;
  double laplacian = 1.0;
  double neumann = 0.0;

  void validate() const {
    detail::require(dirichlet >= 0 && inside >= 0 && laplacian >= 0 &&
                        neumann >= 0,
                    "LossWeights: weights must be >= 0");
    detail::require(dirichlet + inside + laplacian + neumann > 0,
                    "LossWeights: at least one positive weight");
  }
};

enum class Optimizer { sgd, adam };

struct TrainConfig {
  int epochs = 50;
  int batch_size = 10;
  double lr = 2e-4;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 1;
  std::string precision = "float64";

  void validate() const {
    detail::require(epochs >= 1, "TrainConfig: epochs >= 1");
    detail::require(batch_size >= 1, "TrainConfig: batch_size >= 1");
    detail::require(precision == "float64",
                    "TrainConfig: only float64 is built");
  }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double phi_l1 = 0.0;
  double e_l1 = 0.0;
  double e_linf = 0.0;

  static std::string csv_header() {
    return "epoch,train_loss,val_loss,phi_l1,E_l1,E_linf";
  }
  std::string csv_row() const {
    std::ostringstream os;
    os.precision(10);
    os << epoch << ',' << train_loss << ',' << val_loss << ',' << phi_l1 << ','
       << e_l1 << ',' << e_linf;
    return os.str();
  }
};

using History = std::vector<EpochStats>;

namespace netdetail {

struct AdamState {
  std::vector<Tensor> m, v;
  long t = 0;
};

inline void optimizer_step(Network& net, AdamState& state, Optimizer opt,
                           double lr) {
  if (opt == Optimizer::sgd) {
    for (auto& l : net.layers) {
      for (Var p : {l.w, l.b}) {
        if (!p->grad_ready) continue;
        for (std::size_t k = 0; k < p->value.v.size(); ++k)
          p->value.v[k] -= lr * p->grad.v[k];
      }
    }
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (state.m.empty()) {
    for (auto& l : net.layers) {
      for (Var p : {l.w, l.b}) {
        state.m.emplace_back(p->value.shape);
        state.v.emplace_back(p->value.shape);
      }
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  std::size_t slot = 0;
  for (auto& l : net.layers) {
    for (Var p : {l.w, l.b}) {
      Tensor& m = state.m[slot];
      Tensor& v = state.v[slot];
      ++slot;
      if (!p->grad_ready) continue;
      for (std::size_t k = 0; k < p->value.v.size(); ++k) {
        const double g = p->grad.v[k];
        m.v[k] = b1 * m.v[k] + (1.0 - b1) * g;
        v.v[k] = b2 * v.v[k] + (1.0 - b2) * g * g;
        p->value.v[k] -=
            lr * (m.v[k] / c1) / (std::sqrt(v.v[k] / c2) + eps);
      }
    }
  }
}

struct Sample {
  Tensor input;      // normalized charge R~
  Tensor charge;     // physical charge R (laplacian-loss source)
  Tensor target;     // physical potential (empty when unavailable)
  bool has_target = false;
};

inline Tensor stack_batch(const std::vector<Sample>& samples,
                          const std::vector<int>& order, int first, int count,
                          Tensor Sample::*member) {
  const Tensor& proto = samples[order[first]].*member;
  Tensor out(count, 1, proto.shape.h, proto.shape.w);
  for (int k = 0; k < count; ++k) {
    const Tensor& t = samples[order[first + k]].*member;
    std::copy(t.v.begin(), t.v.end(),
              out.v.begin() + static_cast<std::ptrdiff_t>(k) *
                                  static_cast<std::ptrdiff_t>(t.v.size()));
  }
  return out;
}

}  // namespace netdetail

// Mini-batch gradient descent on the weighted loss; deterministic for a
// fixed seed in single-threaded mode. History rows carry per-epoch losses
// and validation metrics against the dataset targets.
inline History train(Network& net, const DatasetManifest& data,
                     const LossWeights& weights, const TrainConfig& tc) {
  weights.validate();
  tc.validate();
  detail::require(data.grid == net.trained_grid,
                  "train: dataset grid does not match network input grid");
  detail::require(!(weights.inside > 0.0) || data.has_targets,
                  "train: InsideLoss requires targets in the dataset");
  const GridSpec& grid = data.grid;
  const double ratio = data.normalization;
  detail::require(ratio > 0.0, "train: manifest lacks a normalization ratio");
  const bool cyl = grid.geometry == Geometry::axisymmetric;

  // Load samples once. Validation targets fall back to cg solves so the
  // metric columns exist for target-free (physics-loss) datasets.
  auto load = [&](int idx, bool need_target) {
    netdetail::Sample s;
    ScalarField R = read_field(data.charge_file(idx));
    s.charge = tensor_from_field(R);
    s.input = tensor_from_field(normalize_input(R, ratio));
    if (data.has_targets) {
      s.target = tensor_from_field(read_field(data.target_file(idx)));
      s.has_target = true;
    } else if (need_target) {
      auto bc = cyl ? BoundarySpec::streamer(0.0) : BoundarySpec::dirichlet_zero();
      s.target = tensor_from_field(
          cg_solve(R, grid, bc, 1e-10, 200000, Preconditioner::diagonal).first);
      s.has_target = true;
    }
    return s;
  };
  std::vector<netdetail::Sample> train_set, val_set;
  for (int idx : data.train_indices) train_set.push_back(load(idx, false));
  for (int idx : data.val_indices) val_set.push_back(load(idx, true));
  detail::require(!train_set.empty(), "train: empty training split");

  auto batch_loss = [&](const Tensor& in, const Tensor& charge,
                        const Tensor* target, bool update) {
    Var input = make_leaf(in, false);
    Var out = net.forward(input);
    Var total;
    auto accumulate = [&](Var term, double w) {
      term = scale(term, w);
      total = total ? add(total, term) : term;
    };
    if (weights.dirichlet > 0) accumulate(loss_dirichlet(out), weights.dirichlet);
    if (weights.inside > 0) accumulate(loss_inside(out, *target), weights.inside);
    if (weights.laplacian > 0)
      accumulate(loss_laplacian(out, charge, grid), weights.laplacian);
    if (weights.neumann > 0) accumulate(loss_neumann(out, grid), weights.neumann);
    const double value = total->value.v[0];
    if (!std::isfinite(value))
      throw std::runtime_error("train: loss diverged (non-finite)");
    if (update) backward(total);
    return value;
  };

  Rng shuffle_rng(tc.seed);
  netdetail::AdamState opt_state;
  History history;

  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    // Fisher-Yates with the run's own stream
    for (int k = static_cast<int>(order.size()) - 1; k > 0; --k)
      std::swap(order[k], order[static_cast<int>(shuffle_rng.below(k + 1))]);

    double train_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += tc.batch_size) {
      const int count = static_cast<int>(
          std::min<std::size_t>(tc.batch_size, order.size() - start));
      Tensor in = netdetail::stack_batch(train_set, order,
                                         static_cast<int>(start), count,
                                         &netdetail::Sample::input);
      Tensor charge = netdetail::stack_batch(train_set, order,
                                             static_cast<int>(start), count,
                                             &netdetail::Sample::charge);
      Tensor target;
      if (weights.inside > 0)
        target = netdetail::stack_batch(train_set, order,
                                        static_cast<int>(start), count,
                                        &netdetail::Sample::target);
      net.zero_grad();
      train_loss += batch_loss(in, charge,
                               weights.inside > 0 ? &target : nullptr, true);
      netdetail::optimizer_step(net, opt_state, tc.optimizer, tc.lr);
      ++batches;
    }
    train_loss /= std::max(1, batches);

    EpochStats row;
    row.epoch = epoch;
    row.train_loss = train_loss;
    if (!val_set.empty()) {
      std::vector<int> vorder(val_set.size());
      std::iota(vorder.begin(), vorder.end(), 0);
      double vl = 0.0;
      int vb = 0;
      for (std::size_t start = 0; start < vorder.size();
           start += tc.batch_size) {
        const int count = static_cast<int>(
            std::min<std::size_t>(tc.batch_size, vorder.size() - start));
        Tensor in = netdetail::stack_batch(val_set, vorder,
                                           static_cast<int>(start), count,
                                           &netdetail::Sample::input);
        Tensor charge = netdetail::stack_batch(val_set, vorder,
                                               static_cast<int>(start), count,
                                               &netdetail::Sample::charge);
        Tensor target;
        if (weights.inside > 0)
          target = netdetail::stack_batch(val_set, vorder,
                                          static_cast<int>(start), count,
                                          &netdetail::Sample::target);
        vl += batch_loss(in, charge, weights.inside > 0 ? &target : nullptr,
                         false);
        ++vb;
      }
      row.val_loss = vl / std::max(1, vb);

      // metric columns: per-sample field norms against targets
      double phi_l1 = 0, e_l1 = 0, e_linf = 0;
      for (const auto& s : val_set) {
        Var input = make_leaf(s.input, false);
        Var out = net.forward(input);
        ScalarField pred = field_from_tensor(out->value, grid);
        ScalarField target_f = field_from_tensor(s.target, grid);
        VectorField Ep = gradient_to_efield(pred);
        VectorField Et = gradient_to_efield(target_f);
        phi_l1 += norm_1(pred, target_f);
        e_l1 += norm_1(Ep, Et);
        e_linf = std::max(e_linf, norm_inf(Ep, Et));
      }
      row.phi_l1 = phi_l1 / val_set.size();
      row.e_l1 = e_l1 / val_set.size();
      row.e_linf = e_linf;
    }
    history.push_back(row);
  }
  return history;
}

inline void write_history_csv(const std::string& path, const History& h) {
  std::ofstream os(path);
  os << EpochStats::csv_header() << "\n";
  for (const auto& row : h) os << row.csv_row() << "\n";
}

// ---------------------------------------------------------------------------
// Inference: normalized forward pass plus the resolution-ratio correction,
// then E = -grad(phi). The output of the net is the physical potential at
// the trained resolution; other resolutions scale by (dx_sim/dx_NN)^2.
// ---------------------------------------------------------------------------

inline std::pair<ScalarField, VectorField> infer(const Network& net,
                                                 const ScalarField& R,
                                                 double ratio,
                                                 double delta_nn) {
  const GridSpec& g = R.grid;
  const double trained_aspect = net.trained_grid.Lx / net.trained_grid.Ly;
  detail::require(std::abs(g.Lx / g.Ly - trained_aspect) <
                      1e-9 * trained_aspect + 1e-12,
                  "infer: aspect ratio differs from the training domain");
  Var input = make_leaf(tensor_from_field(normalize_input(R, ratio)), false);
  Var out = net.forward(input);
  ScalarField phi = field_from_tensor(out->value, g);
  phi *= resolution_ratio(g.dx(), delta_nn);
  return {phi, gradient_to_efield(phi)};
}

inline std::pair<ScalarField, VectorField> infer(const Network& net,
                                                 const ScalarField& R) {
  return infer(net, R, net.norm_ratio, net.delta_nn);
}

}  // namespace poisnet
