#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poisnet/backend.hpp"
#include "poisnet/config.hpp"
#include "poisnet/dataset.hpp"
#include "poisnet/net.hpp"
#include "poisnet/oscillation.hpp"
#include "poisnet/parallel.hpp"
#include "poisnet/streamer.hpp"

namespace poisnet::cli {

inline constexpr const char* version = "0.1.0";

// The reference charge of the square test problem: two Gaussians of width
// 0.1 Lx at (0.35, 0.5) and (0.65, 0.5) in domain units.
inline ScalarField two_gaussian_charge(const GridSpec& g,
                                       double amplitude = charge_scale()) {
  ScalarField R(g);
  const double s = 0.1 * g.Lx;
  const double cy = 0.5 * g.Ly;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double x = g.x(i), y = g.y(j);
      const double d1 = (x - 0.35 * g.Lx) * (x - 0.35 * g.Lx) +
                        (y - cy) * (y - cy);
      const double d2 = (x - 0.65 * g.Lx) * (x - 0.65 * g.Lx) +
                        (y - cy) * (y - cy);
      R(i, j) = amplitude * (std::exp(-d1 / (s * s)) + std::exp(-d2 / (s * s)));
    }
  return R;
}

struct CommandContext {
  RunConfig cfg;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  std::string invocation;
  std::vector<std::string> outputs;

  std::string out_path(const std::string& name) {
    outputs.push_back(name);
    return (std::filesystem::path(out_dir) / name).string();
  }
};

inline void write_run_record(CommandContext& ctx, double seconds) {
  std::ofstream os((std::filesystem::path(ctx.out_dir) / "run.txt").string());
  os << "command " << ctx.invocation << "\n";
  os << "version " << version << "\n";
  os << "config_hash " << std::hex << ctx.cfg.hash() << std::dec << "\n";
  if (ctx.seed_override) os << "seed_override " << *ctx.seed_override << "\n";
  os << "threads " << thread_count().load() << "\n";
  os << "seconds " << seconds << "\n";
  for (const auto& f : ctx.outputs) os << "output " << f << "\n";
}

inline std::unique_ptr<PoissonBackend> make_backend(
    const RunConfig& cfg, const std::string& section, const GridSpec& grid,
    const BoundarySpec& bc) {
  const std::string kind = cfg.get(section + ".backend", std::string("cg"));
  const double rtol = cfg.get(section + ".rtol", 1e-10);
  if (kind == "analytic") {
    detail::require(grid.geometry == Geometry::cartesian,
                    "analytic backend requires a cartesian grid");
    const int modes = cfg.get(section + ".modes", default_mode_count(grid));
    return std::make_unique<AnalyticBackend>(modes, modes);
  }
  if (kind == "jacobi")
    return std::make_unique<JacobiBackend>(bc, rtol, 2000000);
  if (kind == "cg") return std::make_unique<CgBackend>(bc, rtol);
  if (kind == "network") {
    const std::string path =
        cfg.resolve_path(cfg.get("network.checkpoint", std::string()));
    detail::require(!path.empty(),
                    "network backend requires network.checkpoint");
    return std::make_unique<NetworkBackend>(load_network(path));
  }
  throw std::runtime_error("unknown backend '" + kind + "'");
}

inline NetConfig network_config(const RunConfig& cfg) {
  NetConfig nc;
  nc.arch = cfg.get("network.arch", std::string("unet")) == "msnet"
                ? Arch::msnet
                : Arch::unet;
  nc.n_b = cfg.get("network.n_b", 3);
  nc.ksx = cfg.get("network.ksx", 3);
  nc.ksy = cfg.get("network.ksy", 3);
  nc.width = cfg.get("network.width", 16);
  nc.budget = cfg.get("network.budget", 0L);
  if (cfg.has("network.depths")) {
    nc.depths.clear();
    std::istringstream ls(cfg.get("network.depths", std::string()));
    std::string tok;
    while (std::getline(ls, tok, ','))
      if (!tok.empty()) nc.depths.push_back(std::stoi(tok));
    nc.n_b = static_cast<int>(nc.depths.size());
  } else {
    const int rf = cfg.get("network.rf", 64);
    nc.depths = depths_for_rf(nc.n_b, std::min(nc.ksx, nc.ksy), rf);
  }
  return nc;
}

inline DatasetRequest dataset_request(const RunConfig& cfg,
                                      std::optional<std::uint64_t> seed) {
  DatasetRequest req;
  req.grid = cfg.grid();
  req.kind = cfg.get("dataset.kind", std::string("random")) == "fourier"
                 ? DatasetKind::fourier_N_p
                 : DatasetKind::random_c;
  req.count = cfg.get("dataset.count", 500);
  req.c = cfg.get("dataset.c", 8);
  req.N = cfg.get("dataset.N", 3);
  req.p = cfg.get("dataset.p", 0.0);
  req.alpha = cfg.get("dataset.alpha", 0.1);
  req.amplitude = charge_scale(cfg.get("dataset.amplitude_n0", 1.0e16));
  req.train_fraction = cfg.get("dataset.train_fraction", 0.8);
  req.seed = seed.value_or(cfg.get("dataset.seed", std::uint64_t{42}));
  return req;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int cmd_dataset(CommandContext& ctx) {
  DatasetRequest req = dataset_request(ctx.cfg, ctx.seed_override);
  const std::string targets =
      ctx.cfg.get("dataset.targets", std::string("cg"));
  const double target_rtol = ctx.cfg.get("dataset.target_rtol", 1e-10);
  const std::string dir =
      (std::filesystem::path(ctx.out_dir) /
       ctx.cfg.get("dataset.dir", std::string("dataset"))).string();
  DatasetManifest m = build_dataset(
      req, targets == "none" ? TargetSolver::none : TargetSolver::cg, dir,
      target_rtol);
  ctx.outputs.push_back(dir + "/manifest.txt");
  std::cout << "dataset " << m.name() << ": " << m.count << " samples ("
            << m.train_indices.size() << " train / " << m.val_indices.size()
            << " val) in " << dir << "\n";
  return 0;
}

inline int cmd_solve(CommandContext& ctx) {
  const GridSpec grid = ctx.cfg.grid();
  const std::string charge =
      ctx.cfg.get("solve.charge", std::string("two_gaussians"));
  ScalarField R(grid);
  if (charge == "two_gaussians") {
    R = two_gaussian_charge(grid);
  } else if (charge == "mode") {
    R = mode_field(1, 1, charge_scale(), grid);
  } else if (charge == "file") {
    R = read_field(ctx.cfg.resolve_path(
        ctx.cfg.get("solve.charge_file", std::string())));
  } else {
    throw std::runtime_error("solve.charge must be two_gaussians, mode or file");
  }

  const bool cyl = grid.geometry == Geometry::axisymmetric;
  auto bc = cyl ? BoundarySpec::streamer(0.0) : BoundarySpec::dirichlet_zero();
  auto backend = make_backend(ctx.cfg, "solve", grid, bc);
  ScalarField phi = backend->solve(R);
  VectorField E = gradient_to_efield(phi);

  write_field(ctx.out_path("phi.pfld"), phi);
  write_field_csv(ctx.out_path("phi.csv"), phi);
  ScalarField Ex(grid), Ey(grid);
  Ex.values = E.x;
  Ey.values = E.y;
  write_field(ctx.out_path("Ex.pfld"), Ex);
  write_field(ctx.out_path("Ey.pfld"), Ey);

  // interior residual report
  ScalarField lap = laplacian(phi);
  double res1 = 0.0, resinf = 0.0;
  int count = 0;
  for (int j = 1; j < grid.ny - 1; ++j)
    for (int i = 1; i < grid.nx - 1; ++i) {
      const double r = lap(i, j) + R(i, j);
      res1 += std::abs(r);
      resinf = std::max(resinf, std::abs(r));
      ++count;
    }
  std::ofstream rep(ctx.out_path("report.csv"));
  rep << SolveReport::csv_header() << ",residual_l1,residual_linf\n";
  rep << backend->last_report().csv_row() << ',' << res1 / count << ','
      << resinf << "\n";
  std::cout << "solve: " << backend->name() << " on " << grid.nx << "x"
            << grid.ny << ", interior residual L1 " << res1 / count << "\n";
  return 0;
}

inline int cmd_train(CommandContext& ctx) {
  const GridSpec grid = ctx.cfg.grid();
  const std::string dir = ctx.cfg.resolve_path(
      ctx.cfg.get("dataset.dir", std::string("dataset")));
  DatasetManifest data = load_manifest(dir);

  Network net = [&] {
    const std::string ckpt =
        ctx.cfg.resolve_path(ctx.cfg.get("network.checkpoint", std::string()));
    if (!ckpt.empty() && std::filesystem::exists(ckpt)) {
      std::cout << "resuming from " << ckpt << "\n";
      return load_network(ckpt);
    }
    NetConfig nc = network_config(ctx.cfg);
    return build_network(nc, grid,
                         ctx.cfg.get("network.init_seed", std::uint64_t{1}));
  }();
  net.norm_ratio = data.normalization;

  RfBreakdown rf = receptive_field(net.config);
  const auto [rf_opt, nb_opt] =
      optimal_params(std::min(grid.nx, grid.ny), std::min(net.config.ksx,
                                                          net.config.ksy));
  std::cout << "network: " << (net.config.arch == Arch::unet ? "unet" : "msnet")
            << net.config.n_b << ", RF " << rf.x << "x" << rf.y
            << ", params " << net.parameter_count() << "\n";
  std::cout << "optimal for n_p=" << std::min(grid.nx, grid.ny)
            << ": RF " << rf_opt << ", n_b " << nb_opt << "\n";
  if (net.warn_small_scale)
    std::cout << "warning: coarsest branch image does not exceed the kernel\n";

  LossWeights lw;
  lw.dirichlet = ctx.cfg.get("training.w_dirichlet", 1.0);
  lw.inside = ctx.cfg.get("training.w_inside", 0.0);
  lw.laplacian = ctx.cfg.get("training.w_laplacian", 1.0);
  lw.neumann = ctx.cfg.get("training.w_neumann",
                           grid.geometry == Geometry::axisymmetric ? 1.0 : 0.0);
  TrainConfig tc;
  tc.epochs = ctx.cfg.get("training.epochs", 50);
  tc.batch_size = ctx.cfg.get("training.batch_size", 10);
  tc.lr = ctx.cfg.get("training.lr", 2e-4);
  tc.optimizer = ctx.cfg.get("training.optimizer", std::string("adam")) ==
                         "sgd"
                     ? Optimizer::sgd
                     : Optimizer::adam;
  tc.seed = ctx.seed_override.value_or(
      ctx.cfg.get("training.seed", std::uint64_t{1}));
  tc.precision = ctx.cfg.get("training.precision", std::string("float64"));

  History history = train(net, data, lw, tc);
  save_network(ctx.out_path("model.pnet"), net);
  write_history_csv(ctx.out_path("training.csv"), history);
  std::cout << "trained " << tc.epochs << " epochs; final val E_l1 "
            << history.back().e_l1 << "\n";
  return 0;
}

inline int cmd_eval(CommandContext& ctx) {
  const GridSpec grid = ctx.cfg.grid();
  auto bc = grid.geometry == Geometry::axisymmetric
                ? BoundarySpec::streamer(0.0)
                : BoundarySpec::dirichlet_zero();
  auto backend = make_backend(ctx.cfg, "eval", grid, bc);
  Predictor pred = [&](const ScalarField& R) { return backend->solve(R); };

  const auto dataset_dirs =
      ctx.cfg.get_names("eval.datasets", std::vector<std::string>{});
  if (!dataset_dirs.empty()) {
    std::vector<DatasetManifest> sets;
    for (const auto& d : dataset_dirs)
      sets.push_back(load_manifest(ctx.cfg.resolve_path(d)));
    auto rows = evaluate(pred, sets);
    std::ofstream os(ctx.out_path("eval.csv"));
    os << EvalRow::csv_header() << "\n";
    for (const auto& row : rows) {
      os << row.csv_row() << "\n";
      std::cout << row.csv_row() << "\n";
    }
  }

  // single-mode resolution sweep (per-mode spectral evaluation)
  if (ctx.cfg.has("eval.resolutions") || ctx.cfg.has("eval.mode_n")) {
    const int n = ctx.cfg.get("eval.mode_n", 1);
    const int m = ctx.cfg.get("eval.mode_m", 1);
    const double amp = ctx.cfg.get("eval.amplitude", charge_scale());
    const auto factors =
        ctx.cfg.get_list("eval.resolutions", {0.5, 1.0, 2.0});
    std::ofstream os(ctx.out_path("modes.csv"));
    os << "factor,nx,phi_l1,E_l1\n";
    for (double f : factors) {
      const int nodes =
          std::max(8, static_cast<int>(std::lround((grid.nx - 1) * f)) + 1);
      GridSpec gf(nodes, nodes, grid.Lx, grid.Ly, grid.geometry);
      ScalarField R = mode_field(n, m, amp, gf);
      const double k2 = std::pow(n * M_PI / gf.Lx, 2.0) +
                        std::pow(m * M_PI / gf.Ly, 2.0);
      ScalarField exact = mode_field(n, m, amp / k2, gf);
      ScalarField phi = pred(R);
      VectorField Ep = gradient_to_efield(phi);
      VectorField Et = gradient_to_efield(exact);
      os << f << ',' << nodes << ',' << norm_1(phi, exact) << ','
         << norm_1(Ep, Et) << "\n";
    }
  }
  return 0;
}

inline int cmd_oscillate(CommandContext& ctx) {
  OscillationConfig oc;
  oc.grid = ctx.cfg.grid();
  oc.n0 = ctx.cfg.get("simulation.n0", 1.0e16);
  oc.ne_amp = ctx.cfg.get("simulation.ne_amp", 1.0e11);
  oc.sigma = ctx.cfg.get("simulation.sigma", 1.0e-3);
  oc.T0 = ctx.cfg.get("simulation.T0", 300.0);
  oc.periods = ctx.cfg.get("simulation.periods", 2.0);
  oc.steps_per_period = ctx.cfg.get("simulation.steps_per_period", 384);
  oc.center1 = {0.4 * oc.grid.Lx, 0.5 * oc.grid.Ly};
  oc.center2 = {0.6 * oc.grid.Lx, 0.5 * oc.grid.Ly};
  oc.snapshot_times =
      ctx.cfg.get_list("simulation.snapshot_times", {});

  auto backend =
      make_backend(ctx.cfg, "simulation", oc.grid, BoundarySpec::dirichlet_zero());
  OscillationDiagnostics diag = run_oscillation(oc, *backend);
  diag.write_csv(ctx.out_path("oscillation.csv"));
  for (std::size_t k = 0; k < diag.snapshots.size(); ++k)
    write_field(ctx.out_path("ne_snap" + std::to_string(k) + ".pfld"),
                diag.snapshots[k].second);

  const auto [omega, T_p] = plasma_frequency(oc.n0);
  const double T_m = measure_period(diag.t, diag.mean_probe);
  std::cout << "oscillation: backend " << backend->name() << ", T_p analytic "
            << T_p << " s, measured " << T_m << " s (error "
            << std::abs(T_m - T_p) / T_p * 100.0 << "%)\n";
  return 0;
}

inline int cmd_streamer(CommandContext& ctx) {
  StreamerConfig sc;
  GridSpec g = ctx.cfg.grid();
  if (g.geometry != Geometry::axisymmetric)
    g = GridSpec(ctx.cfg.get("grid.nx", 401), ctx.cfg.get("grid.ny", 101),
                 ctx.cfg.get("grid.Lx", 4.0e-3), ctx.cfg.get("grid.Ly", 1.0e-3),
                 Geometry::axisymmetric);
  sc.grid = g;
  sc.n0 = ctx.cfg.get("simulation.n0", 1.0e19);
  sc.n_back = ctx.cfg.get("simulation.n_back", 1.0e14);
  sc.x0 = ctx.cfg.get("simulation.x0", 0.5 * g.Lx);
  sc.sigma_x = ctx.cfg.get("simulation.sigma_x", 1.0e-4);
  sc.sigma_r = ctx.cfg.get("simulation.sigma_r", 1.0e-4);
  sc.Ex = ctx.cfg.get("simulation.Ex", 4.8e6);
  sc.dt = ctx.cfg.get("simulation.dt", 1.0e-12);
  sc.steps = ctx.cfg.get("simulation.steps", 2800);
  sc.record_every = ctx.cfg.get("simulation.record_every", 50);
  sc.snapshot_times = ctx.cfg.get_list("simulation.snapshot_times", {});

  auto backend =
      make_backend(ctx.cfg, "simulation", sc.grid, BoundarySpec::streamer(0.0));
  ChemistryTable chem = ChemistryTable::default_air();
  StreamerDiagnostics diag = run_streamer(sc, chem, *backend);
  diag.write_csv(ctx.out_path("streamer.csv"));
  for (std::size_t k = 0; k < diag.snapshots.size(); ++k)
    write_field(ctx.out_path("ne_snap" + std::to_string(k) + ".pfld"),
                diag.snapshots[k].second);
  std::cout << "streamer: backend " << backend->name() << ", fronts "
            << diag.x_neg.back() << " / " << diag.x_pos.back() << " m, E_d "
            << diag.Ed.back() << " J";
  if (diag.cfl_warnings > 0)
    std::cout << " (" << diag.cfl_warnings << " dt-limit warnings)";
  std::cout << "\n";
  return 0;
}

inline int cmd_bench(CommandContext& ctx) {
  const auto backends = ctx.cfg.get_names(
      "benchmark.backends", {"jacobi", "cg"});
  const auto sizes = ctx.cfg.get_list("benchmark.sizes", {33, 65, 101, 129});
  const int reps = ctx.cfg.get("benchmark.reps", 20);
  const double rtol = ctx.cfg.get("benchmark.rtol", 1e-3);
  const GridSpec base = ctx.cfg.grid();

  std::ofstream os(ctx.out_path("bench.csv"));
  os << SolveReport::csv_header() << "\n";
  for (const std::string& kind : backends) {
    for (double size : sizes) {
      const int n = static_cast<int>(size);
      GridSpec g(n, n, base.Lx, base.Ly, Geometry::cartesian);
      ScalarField R = two_gaussian_charge(g);
      double seconds = 0.0, iters = 0.0, residual = 0.0;
      for (int rep = 0; rep < reps; ++rep) {
        std::unique_ptr<PoissonBackend> b;
        if (kind == "network")
          b = std::make_unique<NetworkBackend>(load_network(ctx.cfg.resolve_path(
              ctx.cfg.get("network.checkpoint", std::string()))));
        else if (kind == "jacobi")
          b = std::make_unique<JacobiBackend>(BoundarySpec::dirichlet_zero(),
                                              rtol, 2000000);
        else if (kind == "cg")
          b = std::make_unique<CgBackend>(BoundarySpec::dirichlet_zero(), rtol);
        else if (kind == "analytic")
          b = std::make_unique<AnalyticBackend>(10, 10);
        else
          throw std::runtime_error("bench: unknown backend " + kind);
        ScalarField phi = b->solve(R);
        seconds += b->last_report().seconds;
        iters += b->last_report().iterations;
        residual = b->last_report().residual;
      }
      SolveReport row;
      row.solver = kind;
      row.nodes = g.size();
      row.rtol = rtol;
      row.iterations = static_cast<int>(iters / reps);
      row.residual = residual;
      row.seconds = seconds / reps;
      os << row.csv_row() << "\n";
      std::cout << row.csv_row() << "\n";
    }
  }
  return 0;
}

inline int cmd_rf(CommandContext& ctx) {
  NetConfig nc = network_config(ctx.cfg);
  const GridSpec grid = ctx.cfg.grid();
  Network net = build_network(nc, grid,
                              ctx.cfg.get("network.init_seed", std::uint64_t{1}));
  RfBreakdown rf = receptive_field(net.config);
  std::cout << "architecture "
            << (net.config.arch == Arch::unet ? "unet" : "msnet")
            << net.config.n_b << " k " << net.config.ksx << "x" << net.config.ksy
            << " depths";
  for (int d : net.config.depths) std::cout << ' ' << d;
  std::cout << "\n";
  for (int b = 0; b < net.config.n_b; ++b)
    std::cout << "branch " << b << ": RF_x " << rf.branch_x[b] << " RF_y "
              << rf.branch_y[b] << "\n";
  std::cout << "formula RF: " << rf.x << " x " << rf.y << "\n";

  int probe = 32;
  while (probe < std::max(rf.x, rf.y) + 8 && probe < 1024) probe *= 2;
  MeasuredRf meas = empirical_rf(net, probe);
  std::cout << "measured RF (probe " << probe << "): " << meas.x << " x "
            << meas.y << "\n";
  const auto [rf_opt, nb_opt] = optimal_params(std::min(grid.nx, grid.ny),
                                               std::min(nc.ksx, nc.ksy));
  std::cout << "optimal for n_p=" << std::min(grid.nx, grid.ny) << ": RF "
            << rf_opt << " n_b " << nb_opt << "\n";
  if (net.warn_small_scale)
    std::cout << "warning: coarsest branch image does not exceed the kernel\n";
  return 0;
}

// ---------------------------------------------------------------------------

inline int run(int argc, char** argv) {
  CLI::App app{"Poisson surrogate laboratory for plasma fluid simulation"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", config_path, "configuration file (INI)");
  app.add_option("--out", out_dir, "output directory");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "seed override");
  app.add_option("--threads", threads, "worker threads for stencil loops");

  const std::vector<std::pair<std::string, int (*)(CommandContext&)>> cmds = {
      {"dataset", cmd_dataset},   {"solve", cmd_solve},
      {"train", cmd_train},       {"eval", cmd_eval},
      {"oscillate", cmd_oscillate}, {"streamer", cmd_streamer},
      {"bench", cmd_bench},       {"rf", cmd_rf},
  };
  for (const auto& [name, fn] : cmds) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  set_threads(threads);
  CommandContext ctx;
  try {
    if (!config_path.empty()) ctx.cfg = RunConfig::from_file(config_path);
    ctx.out_dir = out_dir;
    if (seed_opt->count() > 0) ctx.seed_override = seed;
    std::ostringstream inv;
    for (int k = 0; k < argc; ++k) inv << (k ? " " : "") << argv[k];
    ctx.invocation = inv.str();
    std::filesystem::create_directories(out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    int rc = 1;
    for (const auto& [name, fn] : cmds)
      if (app.got_subcommand(name)) rc = fn(ctx);
    write_run_record(ctx, std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0).count());
    return rc;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace poisnet::cli
