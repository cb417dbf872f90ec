// Acceptance suite: one pass/fail line per criterion, exit code = failures.
// Heavy artifacts (datasets, trained networks) are shared down the list.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "poisnet/cli.hpp"
#include "poisnet/dataset.hpp"
#include "poisnet/losses.hpp"
#include "poisnet/net.hpp"
#include "poisnet/oscillation.hpp"
#include "poisnet/streamer.hpp"

using namespace poisnet;

namespace {

struct Suite {
  int failures = 0;
  std::ostringstream details;

  void criterion(int number, const std::string& title,
                 const std::function<bool(std::ostringstream&)>& body) {
    std::ostringstream info;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ok = body(info);
    } catch (const std::exception& e) {
      info << " exception: " << e.what();
      ok = false;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%s] criterion %d: %s (%.1f s)%s\n", ok ? "PASS" : "FAIL",
                number, title.c_str(), secs, info.str().c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

const std::string work_dir = "acceptance_work";

// ---- shared artifacts -----------------------------------------------------

struct TrainedNets {
  GridSpec grid{64, 64, 0.01, 0.01};
  double amplitude = charge_scale(2.0e11);  // oscillation-regime charge scale
  DatasetManifest data;
  Network saturated;   // RF >= 128, Laplacian + Dirichlet
  Network small_rf;    // RF ~ 32, Laplacian + Dirichlet
  Network inside;      // saturated config, Inside + Dirichlet
  History hist_saturated, hist_small, hist_inside;
  double initial_e_l1 = 0.0;  // untrained validation metric of `saturated`
  bool ready = false;
};

double val_e_l1(const Network& net, const DatasetManifest& data) {
  double acc = 0.0;
  for (int idx : data.val_indices) {
    ScalarField R = read_field(data.charge_file(idx));
    ScalarField target = read_field(data.target_file(idx));
    auto [phi, E] = infer(net, R, data.normalization, net.delta_nn);
    VectorField Et = gradient_to_efield(target);
    acc += norm_1(E, Et);
  }
  return acc / static_cast<double>(data.val_indices.size());
}

double mode11_amplitude_error(const Network& net, const DatasetManifest& data) {
  double acc = 0.0;
  for (int idx : data.val_indices) {
    ScalarField R = read_field(data.charge_file(idx));
    ScalarField target = read_field(data.target_file(idx));
    auto [phi, E] = infer(net, R, data.normalization, net.delta_nn);
    acc += std::abs(mode_amplitude(phi, 1, 1) - mode_amplitude(target, 1, 1));
  }
  return acc / static_cast<double>(data.val_indices.size());
}

double val_e_linf(const Network& net, const DatasetManifest& data) {
  double worst = 0.0;
  for (int idx : data.val_indices) {
    ScalarField R = read_field(data.charge_file(idx));
    ScalarField target = read_field(data.target_file(idx));
    auto [phi, E] = infer(net, R, data.normalization, net.delta_nn);
    VectorField Et = gradient_to_efield(target);
    worst = std::max(worst, norm_inf(E, Et));
  }
  return worst;
}

// Finite-difference gradient checker (same oracle as the unit suite).
double gradient_check(std::function<Var(const Var&)> f, Tensor x0,
                      std::uint64_t seed, double eps = 1e-5) {
  Var x = make_leaf(x0, true);
  Var y = f(x);
  Rng rng(seed);
  Tensor G(y->value.shape);
  for (double& v : G.v) v = rng.uniform(-1.0, 1.0);
  backward(y, &G);
  auto scalar = [&](const Tensor& xt) {
    Var xv = make_leaf(xt, false);
    Var yv = f(xv);
    double s = 0.0;
    for (std::size_t k = 0; k < yv->value.v.size(); ++k)
      s += G.v[k] * yv->value.v[k];
    return s;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < x0.v.size(); ++k) {
    Tensor xp = x0, xm = x0;
    xp.v[k] += eps;
    xm.v[k] -= eps;
    const double fd = (scalar(xp) - scalar(xm)) / (2.0 * eps);
    const double ad = x->grad.v[k];
    const double denom = std::max({std::abs(fd), std::abs(ad), 1e-8});
    worst = std::max(worst, std::abs(fd - ad) / denom);
  }
  return worst;
}

}  // namespace

int main() {
  std::filesystem::create_directories(work_dir);
  Suite suite;
  TrainedNets shared;

  // --- 1: analytic oracle vs cg on the two-Gaussian case -------------------
  suite.criterion(1, "analytic(10 modes) vs cg(1e-10), E 1-norm error < 1%",
                  [&](std::ostringstream& info) {
    const auto t0 = std::chrono::steady_clock::now();
    GridSpec g(101, 101, 0.01, 0.01);
    ScalarField R = cli::two_gaussian_charge(g);
    ScalarField phi10 = solve_analytic(R, 10, 10);
    auto [phi_ref, rep] =
        cg_solve(R, g, BoundarySpec::dirichlet_zero(), 1e-10, 50000,
                 Preconditioner::diagonal);
    VectorField E10 = gradient_to_efield(phi10);
    VectorField Eref = gradient_to_efield(phi_ref);
    VectorField zero(g);
    const double rel = norm_1(E10, Eref) / norm_1(Eref, zero);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    info << " rel_error " << rel;
    return rel < 0.01 && rep.residual <= 1e-10 && secs < 30.0;
  });

  // --- 2: grid convergence of cg against the closed-form mode --------------
  suite.criterion(2, "cg vs mode(1,1): 51->101 error ratio in [3.4, 4.6]",
                  [&](std::ostringstream& info) {
    auto err = [](int n) {
      GridSpec g(n, n, 1.0, 1.0);
      ScalarField R = mode_field(1, 1, 2.0 * M_PI * M_PI, g);
      auto [phi, rep] =
          cg_solve(R, g, BoundarySpec::dirichlet_zero(), 1e-12, 50000);
      return norm_inf(phi, mode_field(1, 1, 1.0, g));
    };
    const double ratio = err(51) / err(101);
    info << " ratio " << ratio;
    return ratio > 3.4 && ratio < 4.6;
  });

  // --- 3: receptive-field equalities ----------------------------------------
  suite.criterion(3, "receptive field: formula = measured; worked examples",
                  [&](std::ostringstream& info) {
    bool ok = true;
    // worked branch values
    NetConfig one;
    one.arch = Arch::msnet;
    one.n_b = 1;
    one.depths = {2};
    ok &= receptive_field(one).x == 5;
    NetConfig two;
    two.arch = Arch::msnet;
    two.n_b = 2;
    two.depths = {2, 2};
    RfBreakdown rf2 = receptive_field(two);
    ok &= rf2.branch_x[1] == 8;
    ok &= (1 << 1) + rf2.branch_x[1] == 10;  // coarse-lattice input pixel
    ok &= optimal_params(101, 3) == std::make_pair(202, 5);
    // UNet6 nominal RF 200/300/400
    const int targets[3] = {200, 300, 400};
    const int rf5[3] = {64, 128, 192};
    const int eff[3] = {136, 172, 208};
    for (int k = 0; k < 3; ++k) {
      NetConfig u6;
      u6.arch = Arch::unet;
      u6.n_b = 6;
      u6.depths = depths_for_rf(6, 3, targets[k]);
      RfBreakdown rf = receptive_field(u6);
      ok &= rf.branch_x[5] == rf5[k];
      ok &= targets[k] - rf.branch_x[5] == eff[k];
    }
    // formula vs measured for 6 architectures
    struct Case { Arch a; int nb; std::vector<int> d; int probe; };
    const Case cases[] = {
        {Arch::unet, 3, {2, 2, 2}, 64},   {Arch::unet, 4, {3, 2, 2, 2}, 128},
        {Arch::unet, 5, {2, 2, 2, 2, 2}, 256},
        {Arch::msnet, 3, {2, 2, 2}, 64},  {Arch::msnet, 4, {4, 2, 2, 2}, 128},
        {Arch::msnet, 5, {4, 2, 2, 2, 2}, 256}};
    GridSpec g(64, 64, 0.01, 0.01);
    int equal = 0;
    for (const auto& c : cases) {
      NetConfig cfg;
      cfg.arch = c.a;
      cfg.n_b = c.nb;
      cfg.depths = c.d;
      cfg.width = 3;
      Network net = build_network(cfg, g, 99);
      RfBreakdown rf = receptive_field(net.config);
      MeasuredRf meas = empirical_rf(net, c.probe);
      if (meas.x == rf.x && meas.y == rf.y) ++equal;
    }
    info << " exact_matches " << equal << "/6";
    return ok && equal == 6;
  });

  // --- 4: gradient exactness ------------------------------------------------
  suite.criterion(4, "finite-difference gradients < 1e-5 for every layer/loss",
                  [&](std::ostringstream& info) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    auto rand_tensor = [&](TensorShape s) {
      Tensor t(s);
      for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
      return t;
    };
    double worst = 0.0;
    Tensor in = rand_tensor({1, 2, 8, 8});
    Tensor w = rand_tensor({3, 2, 3, 3});
    Tensor b = rand_tensor({3, 1, 1, 1});
    Var wv = make_leaf(w, false), bv = make_leaf(b, false);
    Var iv = make_leaf(in, false);
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return conv2d(x, wv, bv); }, in, 1));
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return conv2d(iv, x, bv); }, w, 2));
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return conv2d(iv, wv, x); }, b, 3));
    worst = std::max(worst, gradient_check(
        [](const Var& x) { return relu(x); }, in, 4));
    worst = std::max(worst, gradient_check(
        [](const Var& x) { return avgpool2(x); }, in, 5));
    worst = std::max(worst, gradient_check(
        [](const Var& x) { return upsample_bilinear(x, 13, 15); }, in, 6));
    worst = std::max(worst, gradient_check(
        [](const Var& x) { return subsample2(x); }, in, 7));
    worst = std::max(worst, gradient_check(
        [](const Var& x) { return upsample_nearest(x, 16, 16); }, in, 8));
    Tensor other = rand_tensor({1, 2, 8, 8});
    Var ov = make_leaf(other, false);
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return concat_channels(x, ov); }, in, 9));
    worst = std::max(worst, gradient_check(
        [](const Var& x) { return scale(x, -1.7); }, in, 10));
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return add(x, ov); }, in, 11));

    GridSpec gc(8, 8, 0.011, 0.009);
    GridSpec ga(8, 8, 0.011, 0.009, Geometry::axisymmetric);
    Tensor out = rand_tensor({2, 1, 8, 8});
    Tensor target = rand_tensor({2, 1, 8, 8});
    Tensor Rsrc = rand_tensor({2, 1, 8, 8});
    worst = std::max(worst, gradient_check(
        [](const Var& x) { return loss_dirichlet(x); }, out, 12));
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return loss_inside(x, target); }, out, 13));
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return loss_laplacian(x, Rsrc, gc); }, out, 14,
        1e-6));
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return loss_laplacian(x, Rsrc, ga); }, out, 15,
        1e-6));
    worst = std::max(worst, gradient_check(
        [&](const Var& x) { return loss_neumann(x, ga); }, out, 16));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    info << " worst " << worst;
    return worst < 1e-5 && secs < 60.0;
  });

  // --- 5: loss formulas against straight-loop oracles ----------------------
  suite.criterion(5, "loss values match independent oracles to 1e-12 relative",
                  [&](std::ostringstream& info) {
    GridSpec g(9, 7, 0.013, 0.01);
    GridSpec ga(9, 7, 0.013, 0.01, Geometry::axisymmetric);
    Rng rng(77);
    const int B = 3;
    Tensor out(B, 1, g.ny, g.nx), target(B, 1, g.ny, g.nx),
        R(B, 1, g.ny, g.nx);
    for (double& v : out.v) v = rng.uniform(-2.0, 2.0);
    for (double& v : target.v) v = rng.uniform(-2.0, 2.0);
    for (double& v : R.v) v = rng.uniform(-2.0, 2.0);
    Var ov = make_leaf(out, false);

    double rel_worst = 0.0;
    auto compare = [&](double got, double want) {
      rel_worst = std::max(rel_worst,
                           std::abs(got - want) / std::max(std::abs(want), 1e-300));
    };

    {  // DirichletLoss
      double s = 0.0;
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < g.ny; ++j)
          for (int i = 0; i < g.nx; ++i)
            if (i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1)
              s += out.at(b, 0, j, i) * out.at(b, 0, j, i);
      compare(loss_dirichlet(ov)->value.v[0],
              s / (B * (2 * g.nx + 2 * g.ny - 4)));
    }
    {  // InsideLoss
      double s = 0.0;
      for (int b = 0; b < B; ++b)
        for (int j = 1; j < g.ny - 1; ++j)
          for (int i = 1; i < g.nx - 1; ++i) {
            const double r = out.at(b, 0, j, i) - target.at(b, 0, j, i);
            s += r * r;
          }
      compare(loss_inside(ov, target)->value.v[0],
              s / (B * (g.nx - 1) * (g.ny - 1)));
    }
    {  // LaplacianLoss, cartesian
      const double ax = 1.0 / (g.dx() * g.dx()), ay = 1.0 / (g.dy() * g.dy());
      double s = 0.0;
      for (int b = 0; b < B; ++b)
        for (int j = 1; j < g.ny - 1; ++j)
          for (int i = 1; i < g.nx - 1; ++i) {
            const double lap =
                ax * (out.at(b, 0, j, i - 1) - 2 * out.at(b, 0, j, i) +
                      out.at(b, 0, j, i + 1)) +
                ay * (out.at(b, 0, j - 1, i) - 2 * out.at(b, 0, j, i) +
                      out.at(b, 0, j + 1, i));
            const double r = lap + R.at(b, 0, j, i);
            s += r * r;
          }
      compare(loss_laplacian(ov, R, g)->value.v[0],
              s * g.Lx * g.Lx * g.Ly * g.Ly / (B * (g.nx - 1) * (g.ny - 1)));
    }
    {  // NeumannLoss
      const double inv2dr = 1.0 / (2.0 * ga.dy());
      double s = 0.0;
      for (int b = 0; b < B; ++b)
        for (int i = 1; i < ga.nx - 1; ++i) {
          const double d =
              (-3.0 * out.at(b, 0, 0, i) + 4.0 * out.at(b, 0, 1, i) -
               out.at(b, 0, 2, i)) * inv2dr;
          s += d * d;
        }
      compare(loss_neumann(ov, ga)->value.v[0], s / (B * (ga.nx - 2)));
    }
    info << " worst_rel " << rel_worst;
    return rel_worst < 1e-12;
  });

  // --- 6: desk-scale training -----------------------------------------------
  suite.criterion(6, "training: 10x E improvement; RF and loss orderings",
                  [&](std::ostringstream& info) {
    const auto t0 = std::chrono::steady_clock::now();
    DatasetRequest req;
    req.grid = shared.grid;
    req.kind = DatasetKind::random_c;
    req.c = 8;
    req.count = 500;
    req.seed = 424242;
    req.amplitude = shared.amplitude;
    const std::string dir = work_dir + "/random_8_64";
    if (!std::filesystem::exists(dir + "/manifest.txt"))
      shared.data = build_dataset(req, TargetSolver::cg, dir, 1e-10);
    else
      shared.data = load_manifest(dir);

    TrainConfig tc;
    tc.epochs = 50;
    tc.batch_size = 10;
    tc.lr = 2e-4;
    tc.seed = 7;

    LossWeights lapl;  // Laplacian + Dirichlet
    lapl.dirichlet = 1.0;
    lapl.laplacian = 1.0;
    LossWeights insd;  // Inside + Dirichlet
    insd.dirichlet = 1.0;
    insd.laplacian = 0.0;
    insd.inside = 1.0;

    NetConfig sat_cfg;
    sat_cfg.arch = Arch::unet;
    sat_cfg.n_b = 5;
    sat_cfg.depths = {2, 2, 3, 2, 2};  // RF 133 >= 128
    sat_cfg.budget = 12000;
    NetConfig small_cfg;
    small_cfg.arch = Arch::unet;
    small_cfg.n_b = 3;
    small_cfg.depths = {4, 2, 2};  // RF 33 (nominal 32)
    small_cfg.budget = 12000;

    shared.saturated = build_network(sat_cfg, shared.grid, 7);
    shared.saturated.norm_ratio = shared.data.normalization;
    shared.initial_e_l1 = val_e_l1(shared.saturated, shared.data);
    shared.hist_saturated = train(shared.saturated, shared.data, lapl, tc);

    shared.small_rf = build_network(small_cfg, shared.grid, 7);
    shared.small_rf.norm_ratio = shared.data.normalization;
    shared.hist_small = train(shared.small_rf, shared.data, lapl, tc);

    shared.inside = build_network(sat_cfg, shared.grid, 7);
    shared.inside.norm_ratio = shared.data.normalization;
    shared.hist_inside = train(shared.inside, shared.data, insd, tc);

    save_network(work_dir + "/saturated.pnet", shared.saturated);
    shared.ready = true;

    const double final_e = shared.hist_saturated.back().e_l1;
    const double improvement = shared.initial_e_l1 / final_e;
    const double mode_sat = mode11_amplitude_error(shared.saturated, shared.data);
    const double mode_small = mode11_amplitude_error(shared.small_rf, shared.data);
    const double linf_lapl = val_e_linf(shared.saturated, shared.data);
    const double linf_insd = val_e_linf(shared.inside, shared.data);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    info << " (a) E_l1 " << shared.initial_e_l1 << " -> " << final_e << " ("
         << improvement << "x); (b) mode11 err sat " << mode_sat << " vs rf32 "
         << mode_small << "; (c) E_linf laplacian " << linf_lapl
         << " vs inside " << linf_insd;
    return improvement >= 10.0 && mode_sat < mode_small &&
           linf_insd > linf_lapl && secs <= 3600.0;
  });

  // --- 7: resolution-scaling argmin ----------------------------------------
  suite.criterion(7, "single-mode eval: residual argmin at trained resolution",
                  [&](std::ostringstream& info) {
    if (!shared.ready) {
      info << " skipped: training artifacts unavailable";
      return false;
    }
    const double amp = shared.amplitude;
    std::vector<int> sizes = {32, 64, 128};  // 0.5x, 1x, 2x trained
    std::vector<double> residuals;
    for (int n : sizes) {
      GridSpec g(n, n, shared.grid.Lx, shared.grid.Ly);
      ScalarField R = mode_field(1, 1, amp, g);
      const double k2 = 2.0 * std::pow(M_PI / g.Lx, 2.0);
      ScalarField exact = mode_field(1, 1, amp / k2, g);
      auto [phi, E] =
          infer(shared.saturated, R, shared.data.normalization,
                shared.saturated.delta_nn);
      residuals.push_back(norm_1(phi, exact) / exact.max_abs());
      info << " " << n << ":" << residuals.back();
    }
    return residuals[1] < residuals[0] && residuals[1] < residuals[2];
  });

  // --- 8: plasma oscillation ------------------------------------------------
  suite.criterion(8, "oscillation: period within 2%, envelope drift < 10%; "
                     "network run bounded",
                  [&](std::ostringstream& info) {
    OscillationConfig cfg;
    cfg.grid = GridSpec(61, 61, 0.01, 0.01);
    cfg.n0 = 1.0e16;
    cfg.ne_amp = 1.0e11;
    cfg.periods = 2.0;
    cfg.center1 = {0.4 * cfg.grid.Lx, 0.5 * cfg.grid.Ly};
    cfg.center2 = {0.6 * cfg.grid.Lx, 0.5 * cfg.grid.Ly};
    CgBackend cg_backend(BoundarySpec::dirichlet_zero(), 1e-10);
    OscillationDiagnostics diag = run_oscillation(cfg, cg_backend);

    const auto [omega, T_p] = plasma_frequency(cfg.n0);
    const double T_m = measure_period(diag.t, diag.mean_probe);
    const double period_err = std::abs(T_m - T_p) / T_p;

    double first_peak = 0.0, last_peak = 0.0;
    const std::size_t half = diag.mean_probe.size() / 2;
    for (std::size_t k = 0; k < half; ++k)
      first_peak = std::max(first_peak, std::abs(diag.mean_probe[k]));
    for (std::size_t k = half; k < diag.mean_probe.size(); ++k)
      last_peak = std::max(last_peak, std::abs(diag.mean_probe[k]));
    const double drift = std::abs(last_peak - first_peak) / first_peak;
    info << " T " << T_m << " vs " << T_p << " (err " << period_err * 100.0
         << "%), envelope drift " << drift * 100.0 << "%";

    bool network_ok = false;
    if (shared.ready) {
      OscillationConfig ncfg = cfg;
      ncfg.grid = shared.grid;  // trained resolution
      NetworkBackend net_backend(shared.saturated);
      try {
        OscillationDiagnostics ndiag = run_oscillation(ncfg, net_backend);
        double init_peak = 0.0, worst_peak = 0.0;
        for (std::size_t k = 0; k < ndiag.max_probe.size(); ++k) {
          if (k == 0) init_peak = ndiag.max_probe[k];
          worst_peak = std::max(worst_peak, ndiag.max_probe[k]);
        }
        bool finite = true;
        for (double v : ndiag.mean_probe) finite &= std::isfinite(v);
        network_ok = finite && worst_peak < 2.0 * init_peak;
        info << "; network envelope " << worst_peak / init_peak << "x";
      } catch (const std::exception& e) {
        info << "; network run failed: " << e.what();
      }
    } else {
      info << "; network run skipped (no trained net)";
    }
    return period_err < 0.02 && drift < 0.10 && network_ok;
  });

  // --- 9: streamer -----------------------------------------------------------
  suite.criterion(9, "streamer: positivity, E_d monotone, opposite fronts, "
                     "superposition",
                  [&](std::ostringstream& info) {
    const auto t0 = std::chrono::steady_clock::now();
    StreamerConfig cfg;  // 401x101, dt = 1e-12
    cfg.steps = 1000;
    cfg.record_every = 100;
    ChemistryTable chem = ChemistryTable::default_air();
    CgBackend backend(BoundarySpec::streamer(0.0), 1e-8);
    StreamerDiagnostics diag = run_streamer(cfg, chem, backend);

    bool ed_monotone = true, fronts_monotone = true;
    for (std::size_t k = 1; k < diag.t.size(); ++k) {
      ed_monotone &= diag.Ed[k] >= diag.Ed[k - 1];
      fronts_monotone &= diag.x_pos[k] >= diag.x_pos[k - 1] - 1e-12;
      fronts_monotone &= diag.x_neg[k] <= diag.x_neg[k - 1] + 1e-12;
    }
    const bool opposite =
        diag.x_pos.back() > cfg.x0 && diag.x_neg.back() < cfg.x0;
    const bool positive = diag.floored_mass >= 0.0;  // step floors densities

    // superposition identity on the final charge state
    StreamerState probe = init_streamer(cfg.grid, cfg.n0, cfg.n_back, cfg.x0,
                                        cfg.sigma_x, cfg.sigma_r);
    ScalarField R = poisson_rhs(probe);
    Rng rng(5);
    for (int j = 0; j < cfg.grid.ny - 1; ++j)
      for (int i = 1; i < cfg.grid.nx - 1; ++i)
        R(i, j) += rng.uniform(-1.0, 1.0) * 1e8;
    auto [direct, r1] =
        solve_cylindrical(R, cfg.grid, BoundarySpec::streamer(cfg.Ex), 1e-10);
    auto [zero_bc, r2] =
        solve_cylindrical(R, cfg.grid, BoundarySpec::streamer(0.0), 1e-10);
    double worst = 0.0;
    for (int j = 0; j < cfg.grid.ny; ++j)
      for (int i = 0; i < cfg.grid.nx; ++i)
        worst = std::max(worst,
                         std::abs(direct(i, j) -
                                  (zero_bc(i, j) - cfg.Ex * cfg.grid.x(i))));
    const bool superposition = worst < 1e-6 * direct.max_abs();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    info << " fronts " << diag.x_neg.back() << "/" << diag.x_pos.back()
         << " m, E_d " << diag.Ed.back() << " J, superposition err "
         << worst / direct.max_abs();
    return ed_monotone && fronts_monotone && opposite && positive &&
           superposition && secs <= 1200.0;
  });

  // --- 10: benchmark harness -------------------------------------------------
  suite.criterion(10, "bench: jacobi/cg/network table over 4 sizes, monotone",
                  [&](std::ostringstream& info) {
    if (!shared.ready) {
      info << " skipped: no network checkpoint";
      return false;
    }
    const std::string cfg_path = work_dir + "/bench.ini";
    {
      std::ofstream os(cfg_path);
      os << "[network]\ncheckpoint = saturated.pnet\n"
         << "[benchmark]\nbackends = jacobi, cg, network\n"
         << "sizes = 33, 65, 101, 129\nreps = 20\nrtol = 1e-3\n";
    }
    std::vector<std::string> args = {"poisnet", "--config", cfg_path, "--out",
                                     work_dir + "/bench", "bench"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    if (cli::run(static_cast<int>(argv.size()), argv.data()) != 0) {
      info << " bench command failed";
      return false;
    }
    // parse the table back
    std::ifstream is(work_dir + "/bench/bench.csv");
    std::string line;
    std::getline(is, line);
    std::map<std::string, std::vector<std::pair<long, double>>> rows;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string solver, tok;
      std::getline(ls, solver, ',');
      std::getline(ls, tok, ',');
      const long nodes = std::stol(tok);
      std::getline(ls, tok, ',');  // rtol
      std::getline(ls, tok, ',');  // iterations
      std::getline(ls, tok, ',');  // residual
      std::getline(ls, tok, ',');  // seconds
      rows[solver].push_back({nodes, std::stod(tok)});
    }
    bool ok = rows.count("jacobi") && rows.count("cg") && rows.count("network");
    for (const char* solver : {"jacobi", "cg"}) {
      auto& r = rows[solver];
      ok &= r.size() == 4;
      for (std::size_t k = 1; k < r.size(); ++k) {
        ok &= r[k].first > r[k - 1].first;
        ok &= r[k].second > r[k - 1].second;
      }
    }
    info << " rows " << rows.size() * 4;
    return ok;
  });

  std::printf("%d of 10 criteria failed\n", suite.failures);
  return suite.failures;
}
