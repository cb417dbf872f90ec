#pragma once

#include <memory>
#include <string>
#include <utility>

#include "poisnet/analytic.hpp"
#include "poisnet/field.hpp"
#include "poisnet/linsolve.hpp"
#include "poisnet/net.hpp"

namespace poisnet {

// A phi-from-R solver on a fixed problem setup (grid geometry and boundary
// conditions are baked in at construction). Iterative backends warm-start
// from their previous solution, so one instance serves one time loop.
class PoissonBackend {
 public:
  virtual ~PoissonBackend() = default;
  virtual ScalarField solve(const ScalarField& R) = 0;
  virtual std::string name() const = 0;
  const SolveReport& last_report() const { return report_; }

 protected:
  SolveReport report_;
};

class AnalyticBackend final : public PoissonBackend {
 public:
  AnalyticBackend(int N, int M) : N_(N), M_(M) {}
  ScalarField solve(const ScalarField& R) override {
    const auto t0 = std::chrono::steady_clock::now();
    ScalarField phi = solve_analytic(R, N_, M_);
    report_ = SolveReport{};
    report_.solver = name();
    report_.nodes = R.grid.size();
    report_.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return phi;
  }
  std::string name() const override { return "analytic"; }

 private:
  int N_, M_;
};

class JacobiBackend final : public PoissonBackend {
 public:
  JacobiBackend(BoundarySpec bc, double rtol, int max_iter)
      : bc_(std::move(bc)), rtol_(rtol), max_iter_(max_iter) {}
  ScalarField solve(const ScalarField& R) override {
    auto [phi, rep] = jacobi_solve(R, R.grid, bc_, rtol_, max_iter_);
    report_ = rep;
    return phi;
  }
  std::string name() const override { return "jacobi"; }

 private:
  BoundarySpec bc_;
  double rtol_;
  int max_iter_;
};

class CgBackend final : public PoissonBackend {
 public:
  CgBackend(BoundarySpec bc, double rtol, int max_iter = 200000,
            Preconditioner precond = Preconditioner::diagonal)
      : bc_(std::move(bc)), rtol_(rtol), max_iter_(max_iter),
        precond_(precond) {}
  ScalarField solve(const ScalarField& R) override {
    auto [phi, rep] =
        cg_solve(R, R.grid, bc_, rtol_, max_iter_, precond_,
                 warm_ ? &previous_ : nullptr);
    report_ = rep;
    previous_ = phi;
    warm_ = true;
    return phi;
  }
  std::string name() const override {
    return precond_ == Preconditioner::diagonal ? "cg-diag" : "cg";
  }

 private:
  BoundarySpec bc_;
  double rtol_;
  int max_iter_;
  Preconditioner precond_;
  ScalarField previous_;
  bool warm_ = false;
};

class NetworkBackend final : public PoissonBackend {
 public:
  explicit NetworkBackend(Network net) : net_(std::move(net)) {}
  ScalarField solve(const ScalarField& R) override {
    const auto t0 = std::chrono::steady_clock::now();
    auto [phi, E] = infer(net_, R);
    report_ = SolveReport{};
    report_.solver = name();
    report_.nodes = R.grid.size();
    report_.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return phi;
  }
  std::string name() const override { return "network"; }
  const Network& network() const { return net_; }

 private:
  Network net_;
};

}  // namespace poisnet
