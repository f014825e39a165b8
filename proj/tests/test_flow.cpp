#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "freqbias/flow.hpp"
#include "support/oracles.hpp"

using namespace freqbias;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

IllustrativeTarget symmetric_target() { return {{{-1.0, -20.0, 1.0}, {-1.0, 20.0, 1.0}}, 0.0, 0.0, 0.0, 0.0}; }

bool non_increasing_loss(const FlowTrajectory& t) {
  for (std::size_t i = 1; i < t.path.size(); ++i) {
    if (t.path[i].loss > t.path[i - 1].loss + 1e-12 * std::max(1.0, t.path[i - 1].loss)) return false;
    if (!(t.path[i].tau > t.path[i - 1].tau)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("illustrative targets", "[flow]") {
  const auto main = illustrative_target(TargetVariant::main);
  REQUIRE(main.modes.size() == 2);
  CHECK_THAT(main.value(-50.0), WithinAbs(5.0, 1e-4));
  const IllustrativeTarget modes_only{main.modes, 0.0, 0.0, 0.0, 0.0};
  CHECK_THAT(main.value(0.0) - modes_only.value(0.0), WithinAbs(0.01, 1e-15));
  // The ripple vanishes at the support edges, so the target is continuous.
  CHECK_THAT(std::cos(main.noise_freq * main.noise_hi), WithinAbs(0.0, 1e-12));
  CHECK_THAT(std::cos(main.noise_freq * main.noise_lo), WithinAbs(0.0, 1e-12));
  CHECK(main.value(7.0) == modes_only.value(7.0));
  CHECK(main.left_mode_y() == -50.0);
  CHECK(main.right_mode_y() == 50.0);

  const auto appendix = illustrative_target(TargetVariant::appendix_d);
  CHECK(appendix.noise_amp == 0.0);
  CHECK(appendix.left_mode_y() == -75.0);
  CHECK(appendix.right_mode_y() == 25.0);
}

TEST_CASE("flow problem matches the general gradient", "[flow]") {
  const auto target = illustrative_target(TargetVariant::main);
  const auto f = [&](double s) { return target.value(s); };
  QuadratureSpec q = flow_quadrature(target, 8193);
  for (double beta : {0.0, 1.0, 2.0, -2.0}) {
    const FlowProblem problem(target, beta, q);
    for (auto [y, xi] : {std::pair{-45.0, 3.0}, std::pair{10.0, -1.0}, std::pair{49.0, 0.5}}) {
      const auto m = problem.evaluate(y, xi);
      const auto sys = problem.system(y, xi);
      CHECK_THAT(m.loss, WithinRel(sobolev_loss(f, sys, beta, q), 1e-10));
      if (beta < 1.0) {
        const auto g = grad_all_params(sys, beta, sobolev_residual(f, sys, beta), q);
        CHECK_THAT(m.grad[0], WithinRel(g.y[0], 1e-9));
        CHECK_THAT(m.grad[1], WithinRel(g.xi[0], 1e-9));
      }
      // Gradient and Hessian against differences of the discretized loss.
      const auto ly = [&](double v) { return problem.loss(v, xi); };
      const auto lx = [&](double v) { return problem.loss(y, v); };
      CHECK(oracle::close_rel(m.grad[0], oracle::richardson_difference(ly, y, 1e-5), 1e-5, 1e-9));
      CHECK(oracle::close_rel(m.grad[1], oracle::richardson_difference(lx, xi, 1e-4), 1e-5, 1e-9));
      const auto gy = [&](double v) { return problem.evaluate(v, xi).grad[0]; };
      const auto gx = [&](double v) { return problem.evaluate(y, v).grad[1]; };
      const auto gyx = [&](double v) { return problem.evaluate(y, v).grad[0]; };
      const double scale = std::abs(m.hess[0]) + std::abs(m.hess[2]);
      CHECK(oracle::close_rel(m.hess[0], oracle::richardson_difference(gy, y, 1e-5), 1e-5, 1e-8 * scale));
      CHECK(oracle::close_rel(m.hess[2], oracle::richardson_difference(gx, xi, 1e-4), 1e-5, 1e-8 * scale));
      CHECK(oracle::close_rel(m.hess[1], oracle::richardson_difference(gyx, xi, 1e-4), 1e-5, 1e-8 * scale));
    }
  }
}

TEST_CASE("flow examples on the main target", "[flow]") {
  const auto target = illustrative_target(TargetVariant::main);
  const auto left = run_flow(target, -60.0, 3.0, 0.0);
  CHECK(left.terminal_class == TerminalClass::LeftMode);
  CHECK(left.grad_norm_final < 1e-3);
  CHECK(non_increasing_loss(left));
  CHECK_THAT(left.path.back().y, WithinAbs(-50.0, 0.1));

  const auto stuck = run_flow(target, 0.0, 3.0, 0.0);
  CHECK(stuck.terminal_class == TerminalClass::Stuck);
  CHECK(non_increasing_loss(stuck));

  const auto right = run_flow(target, 40.0, 3.0, 0.0);
  CHECK(right.terminal_class == TerminalClass::RightMode);
  CHECK(right.grad_norm_final < 1e-3);
}

TEST_CASE("rk4 flow descends and agrees with the implicit flow", "[flow]") {
  const auto target = illustrative_target(TargetVariant::main);
  const FlowProblem problem(target, 0.0, flow_quadrature(target, 8193));
  FlowOptions rk;
  rk.integrator = FlowIntegrator::rk4;
  rk.step = 2e-3;
  rk.steps = 20'000;
  const auto a = run_flow(problem, target, -56.0, 3.0, rk);
  CHECK(non_increasing_loss(a));
  CHECK(a.terminal_class == TerminalClass::LeftMode);
  CHECK_THAT(a.path.back().tau, WithinRel(40.0, 1e-9));
  const auto b = run_flow(problem, target, -56.0, 3.0);
  CHECK_THAT(b.path.back().y, WithinAbs(a.path.back().y, 1e-3));
  CHECK_THAT(b.path.back().xi, WithinAbs(a.path.back().xi, 1e-3));
}

TEST_CASE("classification is stable under step refinement", "[flow]") {
  const auto target = illustrative_target(TargetVariant::main);
  const FlowProblem problem(target, 0.0, flow_quadrature(target));
  FlowOptions fine;
  fine.step *= 0.5;
  fine.tol *= 0.5;
  fine.steps *= 2;
  for (double y0 : {-70.0, -30.0, 0.0, 20.0, 30.0, 70.0}) {
    const auto a = run_flow(problem, target, y0, 3.0);
    const auto b = run_flow(problem, target, y0, 3.0, fine);
    CHECK(a.terminal_class == b.terminal_class);
    if (a.terminal_class != TerminalClass::Stuck) {
      CHECK(a.grad_norm_final < 1e-3);
      CHECK(b.grad_norm_final < 1e-3);
    }
  }
}

TEST_CASE("flow rejects bad options and reports divergence", "[flow]") {
  const auto target = illustrative_target(TargetVariant::main);
  FlowOptions bad;
  bad.step = 0.0;
  CHECK_THROWS_AS(run_flow(target, 0.0, 3.0, 0.0, bad), PreconditionError);
  bad.step = 1e-3;
  bad.steps = 0;
  CHECK_THROWS_AS(run_flow(target, 0.0, 3.0, 0.0, bad), PreconditionError);
  CHECK_THROWS_AS(run_flow(target, std::nan(""), 3.0, 0.0), DivergenceError);
  const FlowProblem problem(target, 0.0, flow_quadrature(target, 1025));
  CHECK_THROWS_AS(region_boundary(problem, target, 3.0, {1.0, 0.0}), PreconditionError);
  CHECK_THROWS_AS(landscape_grid(problem, {0.0, 1.0}, {0.0, 1.0}, 1, 2), PreconditionError);
}

TEST_CASE("symmetric target splits at the midpoint", "[flow]") {
  const auto target = symmetric_target();
  const FlowProblem problem(target, 0.0, flow_quadrature(target));
  std::vector<double> grid;
  for (double y = -29.0; y <= 29.0; y += 2.0) grid.push_back(y);
  const auto scan = region_boundary(problem, target, 1.0, grid);
  REQUIRE(scan.boundary.has_value());
  CHECK(*scan.boundary == 0.0);
  CHECK(scan.largest_left_y0 == -1.0);
  CHECK(scan.smallest_right_y0 == 1.0);
  CHECK(scan.count(TerminalClass::LeftMode) == scan.count(TerminalClass::RightMode));
}

TEST_CASE("landscape grid", "[flow]") {
  const auto target = illustrative_target(TargetVariant::main);
  const FlowProblem l2(target, 0.0, flow_quadrature(target, 8193));
  const auto small = landscape_grid(l2, {-1.0, 1.0}, {0.0, 1.0}, 2, 2);
  CHECK(small.loss.size() == 4);
  CHECK(small.at(1, 0) == l2.loss(1.0, 0.0));

  // Brute-force minimum sits on the dominant mode.
  const auto g = landscape_grid(l2, {-60.0, 60.0}, {0.0, 8.0}, 241, 33);
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.loss.size(); ++i) if (g.loss[i] < g.loss[best]) best = i;
  CHECK_THAT(g.y_values[best / 33], WithinAbs(-50.0, 0.5));
  CHECK_THAT(g.xi_values[best % 33], WithinAbs(5.0, 0.25));

  // Weights (1+|s|)^4 >= 1, so the H^2 loss dominates the L^2 loss pointwise.
  const FlowProblem h2(target, 2.0, flow_quadrature(target, 8193));
  for (double y : {-80.0, -10.0, 0.0, 30.0, 90.0}) {
    for (double xi : {-1.0, 0.0, 3.0}) CHECK(h2.loss(y, xi) >= l2.loss(y, xi));
  }
}

TEST_CASE("loss at an exactly matched mode is the norm of the rest", "[flow]") {
  const auto target = illustrative_target(TargetVariant::appendix_d);
  const IllustrativeTarget rest{{target.modes[1]}, 0.0, 0.0, 0.0, 0.0};
  const auto q = flow_quadrature(target, 8193);
  for (double beta : {0.0, 2.0}) {
    const FlowProblem full(target, beta, q);
    const FlowProblem remainder(rest, beta, q);
    CHECK_THAT(full.loss(-75.0, 5.0), WithinRel(remainder.loss(0.0, 0.0), 1e-12));
  }
}
