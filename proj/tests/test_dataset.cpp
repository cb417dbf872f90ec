/// Dataset generators, normalization, manifests and evaluation tables.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "poisnet/dataset.hpp"
#include "poisnet/linsolve.hpp"

using namespace poisnet;

TEST_CASE("gen_random coarse grid sizes match floor(n_p / c)") {
  // 101/16 -> 6, 101/8 -> 12: sizes surface through the precondition check.
  GridSpec g101(101, 101, 0.01, 0.01);
  CHECK(101 / 16 == 6);
  CHECK(101 / 8 == 12);
  Rng rng(1);
  CHECK_NOTHROW(gen_random_raw(g101, 16, rng));
  // floor(9/8) = 1 < 2: bicubic undefined
  GridSpec g9(9, 9, 1.0, 1.0);
  Rng rng2(1);
  CHECK_THROWS(gen_random_raw(g9, 8, rng2));
}

TEST_CASE("gen_random is deterministic and bounded by bicubic overshoot") {
  GridSpec g(64, 64, 0.01, 0.01);
  Rng a(77), b(77);
  ScalarField f1 = gen_random_raw(g, 8, a);
  ScalarField f2 = gen_random_raw(g, 8, b);
  for (int k = 0; k < g.size(); ++k) CHECK(f1.values[k] == f2.values[k]);
  CHECK(f1.max_abs() <= 1.5);

  Rng c(78);
  ScalarField f3 = gen_random_raw(g, 8, c);
  double diff = 0.0;
  for (int k = 0; k < g.size(); ++k)
    diff = std::max(diff, std::abs(f1.values[k] - f3.values[k]));
  CHECK(diff > 0.0);
}

TEST_CASE("per-sample streams are order independent") {
  GridSpec g(32, 32, 0.01, 0.01);
  DatasetRequest req;
  req.grid = g;
  req.kind = DatasetKind::random_c;
  req.c = 4;
  req.seed = 5;
  req.count = 4;
  ScalarField s2_first = generate_sample(req, 2);
  ScalarField s0 = generate_sample(req, 0);
  ScalarField s2_again = generate_sample(req, 2);
  for (int k = 0; k < g.size(); ++k)
    CHECK(s2_first.values[k] == s2_again.values[k]);
}

TEST_CASE("gen_fourier: boundary zeros, degenerate band, decay limit") {
  GridSpec g(41, 41, 0.01, 0.01);
  Rng rng(3);
  ScalarField f = gen_fourier(g, 3, 0.0, rng);
  for (int i = 0; i < g.nx; ++i) {
    CHECK(f(i, 0) == 0.0);
    CHECK(f(i, g.ny - 1) == 0.0);
  }
  for (int j = 0; j < g.ny; ++j) {
    CHECK(f(0, j) == 0.0);
    CHECK(f(g.nx - 1, j) == 0.0);
  }

  // N = 1 is a single (1,1) mode: field/mode ratio constant
  Rng rng2(4);
  ScalarField single = gen_fourier(g, 1, 0.0, rng2);
  const double a = single(g.nx / 2, g.ny / 2);
  for (int j = 1; j < g.ny - 1; ++j)
    for (int i = 1; i < g.nx - 1; ++i) {
      const double expected = a * std::sin(M_PI * g.x(i) / g.Lx) *
                              std::sin(M_PI * g.y(j) / g.Ly);
      CHECK(single(i, j) == Catch::Approx(expected).margin(1e-9 * std::abs(a)));
    }

  // strong decay kills the (N, N) coefficient relative to (1, 1)
  Rng rng3(5);
  ScalarField damped = gen_fourier(g, 5, 12.0, rng3);
  const double a11 = mode_amplitude(damped, 1, 1);
  const double aNN = mode_amplitude(damped, 5, 5);
  CHECK(std::abs(aNN) < 1e-6 * std::abs(a11));

  Rng rng4(6);
  CHECK_THROWS(gen_fourier(g, 60, 0.0, rng4));
}

TEST_CASE("normalize_input round trip and magnitude") {
  GridSpec g(16, 16, 0.01, 0.01);
  Rng rng(8);
  ScalarField R = gen_random(g, 4, rng);
  CHECK(norm_inf(normalize_input(R, 1.0), R) == 0.0);
  const double ratio = normalization_ratio(g.Lx, g.Ly, 0.1);
  ScalarField Rt = normalize_input(R, ratio);
  CHECK(Rt.max_abs() == Catch::Approx(R.max_abs() * 8.213e-7).epsilon(1e-3));
  ScalarField back = denormalize_input(Rt, ratio);
  CHECK(norm_inf(back, R) < 1e-12 * R.max_abs());
}

TEST_CASE("build_dataset writes verifiable pairs and a split") {
  const std::string dir = "ds_build_test";
  DatasetRequest req;
  req.grid = GridSpec(24, 24, 0.01, 0.01);
  req.kind = DatasetKind::random_c;
  req.c = 4;
  req.count = 10;
  req.seed = 123;
  DatasetManifest m = build_dataset(req, TargetSolver::cg, dir, 1e-10);
  CHECK(m.count == 10);
  CHECK(m.train_indices.size() == 8);
  CHECK(m.val_indices.size() == 2);
  CHECK(m.has_targets);
  CHECK(m.name() == "random_4");

  // re-check the residual of every stored pair on load
  PoissonProblem prob(req.grid, BoundarySpec::dirichlet_zero());
  for (int i = 0; i < m.count; ++i) {
    ScalarField R = read_field(m.charge_file(i));
    ScalarField phi = read_field(m.target_file(i));
    ScalarField Aphi = prob.apply(phi);
    double num = 0.0, den = 0.0;
    for (int j = 1; j < req.grid.ny - 1; ++j)
      for (int ii = 1; ii < req.grid.nx - 1; ++ii) {
        const double r = Aphi(ii, j) - R(ii, j);
        num += r * r;
        den += R(ii, j) * R(ii, j);
      }
    CHECK(std::sqrt(num / den) < 2e-10);
  }

  DatasetManifest loaded = load_manifest(dir);
  CHECK(loaded.count == m.count);
  CHECK(loaded.seed == m.seed);
  CHECK(loaded.normalization == Catch::Approx(m.normalization));
  CHECK(loaded.train_indices == m.train_indices);

  std::filesystem::remove_all(dir);
}

TEST_CASE("build_dataset without targets flags unavailability") {
  const std::string dir = "ds_notarget_test";
  DatasetRequest req;
  req.grid = GridSpec(16, 16, 0.01, 0.01);
  req.kind = DatasetKind::fourier_N_p;
  req.N = 3;
  req.p = 1.0;
  req.count = 3;
  req.seed = 9;
  DatasetManifest m = build_dataset(req, TargetSolver::none, dir);
  CHECK_FALSE(m.has_targets);
  CHECK(m.name() == "fourier_3_1");
  DatasetManifest loaded = load_manifest(dir);
  CHECK_FALSE(loaded.has_targets);
  std::filesystem::remove_all(dir);
}

TEST_CASE("datasets are byte-identical for identical requests") {
  DatasetRequest req;
  req.grid = GridSpec(20, 20, 0.01, 0.01);
  req.kind = DatasetKind::random_c;
  req.c = 4;
  req.count = 3;
  req.seed = 55;
  build_dataset(req, TargetSolver::none, "ds_det_a");
  build_dataset(req, TargetSolver::none, "ds_det_b");
  for (int i = 0; i < 3; ++i) {
    std::ifstream a("ds_det_a/R_" + std::to_string(i) + ".pfld",
                    std::ios::binary);
    std::ifstream b("ds_det_b/R_" + std::to_string(i) + ".pfld",
                    std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)),
                   std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)),
                   std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
  std::filesystem::remove_all("ds_det_a");
  std::filesystem::remove_all("ds_det_b");
}

TEST_CASE("evaluate: cg self-consistency and analytic on band-limited data") {
  DatasetRequest req;
  req.grid = GridSpec(24, 24, 0.01, 0.01);
  req.kind = DatasetKind::fourier_N_p;
  req.N = 3;
  req.p = 0.0;
  req.count = 4;
  req.seed = 31;
  DatasetManifest m = build_dataset(req, TargetSolver::cg, "ds_eval_test", 1e-12);

  Predictor cg_pred = [&](const ScalarField& R) {
    return cg_solve(R, R.grid, BoundarySpec::dirichlet_zero(), 1e-12, 100000,
                    Preconditioner::diagonal)
        .first;
  };
  auto rows = evaluate(cg_pred, {m});
  REQUIRE(rows.size() == 2);
  const double floor_phi = 1e-10 * read_field(m.target_file(0)).max_abs();
  CHECK(rows[0].phi_l1 < floor_phi);
  CHECK(rows[1].dataset == "combined");
  CHECK(rows[1].phi_l1 == Catch::Approx(rows[0].phi_l1));

  // analytic predictor hits the discretization floor on band-limited charges
  Predictor an_pred = [](const ScalarField& R) { return solve_analytic(R, 8, 8); };
  auto an_rows = evaluate(an_pred, {m});
  ScalarField sample = read_field(m.target_file(0));
  CHECK(an_rows[0].phi_l1 < 5e-3 * sample.max_abs());

  // row values are independent of manifest order
  auto rows2 = evaluate(cg_pred, {m, m});
  CHECK(rows2[0].phi_l1 == Catch::Approx(rows2[1].phi_l1));

  std::filesystem::remove_all("ds_eval_test");
}
