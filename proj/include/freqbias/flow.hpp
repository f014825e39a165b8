#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/grad.hpp"
#include "freqbias/lti.hpp"
#include "freqbias/numeric.hpp"
#include "freqbias/parallel.hpp"

namespace freqbias {

// One Lorentzian mode Re(xi / (is - (x + i y))) of a target response.
struct TargetMode {
  double x;
  double y;
  double xi;
};

// Target response F~(is) made of real-residue modes plus a cosine ripple
// noise_amp * cos(noise_freq * s) restricted to [noise_lo, noise_hi].
struct IllustrativeTarget {
  std::vector<TargetMode> modes;
  double noise_amp = 0.0;
  double noise_freq = 0.0;
  double noise_lo = 0.0;
  double noise_hi = 0.0;

  double value(double s) const {
    double acc = 0.0;
    for (const auto& m : modes) {
      const double u = s - m.y;
      acc += -m.xi * m.x / (m.x * m.x + u * u);
    }
    if (noise_amp != 0.0 && s >= noise_lo && s <= noise_hi) acc += noise_amp * std::cos(noise_freq * s);
    return acc;
  }

  double left_mode_y() const {
    require(!modes.empty(), "IllustrativeTarget: no modes");
    return std::min_element(modes.begin(), modes.end(),
                            [](const auto& a, const auto& b) { return a.y < b.y; })->y;
  }

  double right_mode_y() const {
    require(!modes.empty(), "IllustrativeTarget: no modes");
    return std::max_element(modes.begin(), modes.end(),
                            [](const auto& a, const auto& b) { return a.y < b.y; })->y;
  }

  double max_abs_mode_y() const {
    double m = 0.0;
    for (const auto& mode : modes) m = std::max(m, std::abs(mode.y));
    return m;
  }
};

enum class TargetVariant { main, appendix_d };

// main:       5/(is-(-1-50i)) + 0.2/(is-(-1+50i)) + 0.01 cos(9s/4) on [-2pi, 2pi]
// appendix_d: 5/(is-(-1-75i)) + 0.2/(is-(-1+25i)), no ripple
inline IllustrativeTarget illustrative_target(TargetVariant variant) {
  if (variant == TargetVariant::main) {
    return {{{-1.0, -50.0, 5.0}, {-1.0, 50.0, 0.2}}, 0.01, 9.0 / 4.0, -2.0 * kPi, 2.0 * kPi};
  }
  return {{{-1.0, -75.0, 5.0}, {-1.0, 25.0, 0.2}}, 0.0, 0.0, 0.0, 0.0};
}

enum class TerminalClass { LeftMode, RightMode, Stuck };

inline const char* to_string(TerminalClass c) {
  switch (c) {
    case TerminalClass::LeftMode: return "LeftMode";
    case TerminalClass::RightMode: return "RightMode";
    case TerminalClass::Stuck: return "Stuck";
  }
  return "Stuck";
}

struct FlowPoint {
  double tau;
  double y;
  double xi;
  double loss;
};

struct FlowTrajectory {
  std::vector<FlowPoint> path;
  TerminalClass terminal_class = TerminalClass::Stuck;
  double loss_final = 0.0;
  double grad_norm_final = 0.0;
  std::size_t rejected_steps = 0;
};

enum class FlowIntegrator {
  // Linearly implicit Euler on the gradient flow with step-doubling error
  // control; handles the stiff residue direction at large beta.
  implicit,
  // Classical RK4 at a fixed step.
  rk4,
};

struct FlowOptions {
  FlowIntegrator integrator = FlowIntegrator::implicit;
  // Fixed step for rk4; initial step for the implicit integrator.
  double step = 2e-3;
  // Maximum number of accepted steps.
  std::size_t steps = 200'000;
  // Local error tolerance per implicit step, max-norm over (y, xi).
  double tol = 1e-4;
  // Implicit integrator stops once the step at max_step_size moves less than this.
  double x_tol = 1e-12;
  double max_step_size = 1e12;
  // A terminal y within this distance of a mode counts as captured by it.
  double capture_radius = 2.0;
  // Keep every k-th accepted point of the path (the terminal point is always kept).
  std::size_t record_every = 1;
};

// Default quadrature for the illustrative problems: s_max = 100 (max |y_mode| + 1),
// 2^15 + 1 nodes (spacing ~0.3 against the unit half-width of the modes).
inline QuadratureSpec flow_quadrature(const IllustrativeTarget& target,
                                      std::size_t points = (std::size_t{1} << 15) + 1) {
  QuadratureSpec q;
  q.s_max = 100.0 * (target.max_abs_mode_y() + 1.0);
  q.points = points;
  return q;
}

// Loss value, gradient and Hessian of the single-pole fit in (y, xi).
struct LocalModel {
  double loss = 0.0;
  std::array<double, 2> grad{};     // (d/dy, d/dxi)
  std::array<double, 3> hess{};     // (yy, y xi, xi xi)
};

// Discretized H^beta fit of a single pole G~ = Re(xi / (is - (x + iy))) with
// x and zeta = 0 held fixed:
//   L(y, xi) = sum_q w_q (1+|s_q|)^(2 beta) (F~(s_q) - G~(s_q))^2.
class FlowProblem {
 public:
  FlowProblem(const IllustrativeTarget& target, double beta, const QuadratureSpec& quad,
              double pole_real = -1.0)
      : beta_(beta), x_(pole_real), quad_(quad) {
    quad_.validate();
    require(pole_real < 0.0, "FlowProblem: pole real part must be negative");
    nodes_.resize(quad_.points);
    weights_.resize(quad_.points);
    target_.resize(quad_.points);
    for (std::size_t q = 0; q < quad_.points; ++q) {
      const double s = quad_.node(q);
      nodes_[q] = s;
      const double w = sobolev_weight(beta, s);
      weights_[q] = quad_.weight(q) * w * w;
      target_[q] = target.value(s);
    }
  }

  double beta() const noexcept { return beta_; }
  double pole_real() const noexcept { return x_; }
  const QuadratureSpec& quadrature() const noexcept { return quad_; }

  DiagonalLti system(double y, double xi) const {
    return DiagonalLti({{x_}, {y}, {xi}, {0.0}, 0.0});
  }

  double loss(double y, double xi) const {
    const double x2 = x_ * x_;
    const double mx = -x_;
    return blocked_sum<1>([&](std::size_t q, std::array<double, 1>& acc) {
      const double u = nodes_[q] - y;
      const double r = target_[q] - xi * mx / (x2 + u * u);
      acc[0] += weights_[q] * r * r;
    })[0];
  }

  LocalModel evaluate(double y, double xi) const {
    const double x = x_;
    const double x2 = x * x;
    // acc: loss, r*phi, r*phi_y, phi^2, phi*phi_y, phi_y^2, r*phi_yy
    const auto acc = blocked_sum<7>([&](std::size_t q, std::array<double, 7>& a) {
      const double u = nodes_[q] - y;
      const double den = x2 + u * u;
      const double inv = 1.0 / den;
      const double phi = -x * inv;
      const double phi_y = -2.0 * x * u * inv * inv;
      const double phi_yy = 2.0 * x * (x2 - 3.0 * u * u) * inv * inv * inv;
      const double w = weights_[q];
      const double r = target_[q] - xi * phi;
      a[0] += w * r * r;
      a[1] += w * r * phi;
      a[2] += w * r * phi_y;
      a[3] += w * phi * phi;
      a[4] += w * phi * phi_y;
      a[5] += w * phi_y * phi_y;
      a[6] += w * r * phi_yy;
    });
    LocalModel m;
    m.loss = acc[0];
    m.grad = {-2.0 * xi * acc[2], -2.0 * acc[1]};
    m.hess = {2.0 * xi * xi * acc[5] - 2.0 * xi * acc[6],
              2.0 * xi * acc[4] - 2.0 * acc[2],
              2.0 * acc[3]};
    return m;
  }

 private:
  template <std::size_t Dim, typename AddTerm>
  std::array<double, Dim> blocked_sum(const AddTerm& add) const {
    constexpr std::size_t kBlock = 256;
    const std::size_t n = nodes_.size();
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<std::array<double, Dim>> partial(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      std::array<double, Dim> acc{};
      const std::size_t end = std::min(n, (b + 1) * kBlock);
      for (std::size_t q = b * kBlock; q < end; ++q) add(q, acc);
      partial[b] = acc;
    }
    std::array<double, Dim> out{};
    for (std::size_t k = 0; k < Dim; ++k) {
      out[k] = pairwise_sum(blocks, [&](std::size_t b) { return partial[b][k]; });
    }
    return out;
  }

  double beta_;
  double x_;
  QuadratureSpec quad_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> target_;
};

inline TerminalClass classify_terminal(const IllustrativeTarget& target, double y,
                                       double capture_radius) {
  if (std::abs(y - target.left_mode_y()) < capture_radius) return TerminalClass::LeftMode;
  if (std::abs(y - target.right_mode_y()) < capture_radius) return TerminalClass::RightMode;
  return TerminalClass::Stuck;
}

namespace detail {

// Step of (I + h H+) delta = -h g with H+ the positive semidefinite part of
// the 2x2 Hessian.
inline std::array<double, 2> implicit_step(const LocalModel& m, double h) {
  const double a = m.hess[0];
  const double b = m.hess[1];
  const double c = m.hess[2];
  const double mean = 0.5 * (a + c);
  const double radius = std::hypot(0.5 * (a - c), b);
  const double lambda[2] = {mean + radius, mean - radius};
  // Orthonormal eigenvectors of [[a, b], [b, c]].
  double v0[2];
  if (radius == 0.0) {
    v0[0] = 1.0;
    v0[1] = 0.0;
  } else {
    const double ex = lambda[0] - c;
    const double ey = b;
    const double norm = std::hypot(ex, ey);
    if (norm > 0.0) {
      v0[0] = ex / norm;
      v0[1] = ey / norm;
    } else {
      v0[0] = 0.0;
      v0[1] = 1.0;
    }
  }
  const double v1[2] = {-v0[1], v0[0]};
  const double g0 = v0[0] * m.grad[0] + v0[1] * m.grad[1];
  const double g1 = v1[0] * m.grad[0] + v1[1] * m.grad[1];
  const double d0 = -h * g0 / (1.0 + h * std::max(lambda[0], 0.0));
  const double d1 = -h * g1 / (1.0 + h * std::max(lambda[1], 0.0));
  return {d0 * v0[0] + d1 * v1[0], d0 * v0[1] + d1 * v1[1]};
}

// Loss changes below this are rounding noise of the quadrature sum.
inline double loss_slack(double loss) { return 1e-13 * std::max(1.0, std::abs(loss)); }

inline bool finite_state(double y, double xi, double loss) {
  return std::isfinite(y) && std::isfinite(xi) && std::isfinite(loss);
}

}  // namespace detail

// Gradient flow d(y, xi)/dtau = -grad L on the discretized H^beta loss.
inline FlowTrajectory run_flow(const FlowProblem& problem, const IllustrativeTarget& target,
                               double y0, double xi0, const FlowOptions& opt = {}) {
  require(opt.step > 0.0, "run_flow: step must be positive");
  require(opt.steps >= 1, "run_flow: steps must be >= 1");
  require(opt.record_every >= 1, "run_flow: record_every must be >= 1");

  FlowTrajectory traj;
  double y = y0;
  double xi = xi0;
  double tau = 0.0;
  LocalModel m = problem.evaluate(y, xi);
  if (!detail::finite_state(y, xi, m.loss)) throw DivergenceError("run_flow: non-finite initial state", 0);
  traj.path.push_back({tau, y, xi, m.loss});

  std::size_t accepted = 0;
  if (opt.integrator == FlowIntegrator::rk4) {
    const double h = opt.step;
    const auto grad = [&](double yy, double xx) { return problem.evaluate(yy, xx).grad; };
    while (accepted < opt.steps) {
      const auto k1 = m.grad;
      const auto k2 = grad(y - 0.5 * h * k1[0], xi - 0.5 * h * k1[1]);
      const auto k3 = grad(y - 0.5 * h * k2[0], xi - 0.5 * h * k2[1]);
      const auto k4 = grad(y - h * k3[0], xi - h * k3[1]);
      y -= h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
      xi -= h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
      tau += h;
      ++accepted;
      m = problem.evaluate(y, xi);
      if (!detail::finite_state(y, xi, m.loss)) throw DivergenceError("run_flow: non-finite state", accepted);
      if (accepted % opt.record_every == 0 || accepted == opt.steps) traj.path.push_back({tau, y, xi, m.loss});
    }
  } else {
    double h = opt.step;
    const auto advance = [&](double yy, double xx, const LocalModel& at, double hh) {
      const auto d = detail::implicit_step(at, hh);
      return std::array<double, 2>{yy + d[0], xx + d[1]};
    };
    while (accepted < opt.steps) {
      const auto newton = detail::implicit_step(m, opt.max_step_size);
      if (std::max(std::abs(newton[0]), std::abs(newton[1])) < opt.x_tol) break;

      const auto full = advance(y, xi, m, h);
      const auto half = advance(y, xi, m, 0.5 * h);
      const LocalModel mid = problem.evaluate(half[0], half[1]);
      const auto two = advance(half[0], half[1], mid, 0.5 * h);
      const LocalModel end = problem.evaluate(two[0], two[1]);
      if (!detail::finite_state(two[0], two[1], end.loss)) {
        throw DivergenceError("run_flow: non-finite state", accepted);
      }
      const double err = std::max(std::abs(two[0] - full[0]), std::abs(two[1] - full[1]));
      const bool moved = two[0] != y || two[1] != xi;
      if (err <= opt.tol && end.loss <= m.loss + detail::loss_slack(m.loss) && moved) {
        y = two[0];
        xi = two[1];
        tau += h;
        m = end;
        ++accepted;
        if (accepted % opt.record_every == 0) traj.path.push_back({tau, y, xi, m.loss});
        const double grow = err > 0.0 ? 0.9 * std::sqrt(opt.tol / err) : 4.0;
        h = std::min(h * std::clamp(grow, 1.0, 4.0), opt.max_step_size);
      } else {
        ++traj.rejected_steps;
        const double shrink = err > opt.tol ? 0.9 * std::sqrt(opt.tol / err) : 0.25;
        h *= std::clamp(shrink, 0.1, 0.5);
        if (h < 1e-300) break;
      }
    }
    if (traj.path.back().tau != tau) traj.path.push_back({tau, y, xi, m.loss});
  }

  traj.loss_final = m.loss;
  traj.grad_norm_final = std::hypot(m.grad[0], m.grad[1]);
  traj.terminal_class = classify_terminal(target, y, opt.capture_radius);
  return traj;
}

inline FlowTrajectory run_flow(const IllustrativeTarget& target, double y0, double xi0, double beta,
                               const FlowOptions& opt = {}) {
  return run_flow(FlowProblem(target, beta, flow_quadrature(target)), target, y0, xi0, opt);
}

struct RegionScan {
  std::vector<std::pair<double, TerminalClass>> outcomes;
  // Largest LeftMode y0 below the trailing run of RightMode outcomes.
  std::optional<double> largest_left_y0;
  // First y0 of the trailing run of RightMode outcomes.
  std::optional<double> smallest_right_y0;
  // Midpoint between the last non-RightMode y0 and smallest_right_y0.
  std::optional<double> boundary;

  std::size_t count(TerminalClass c) const {
    return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(),
                                                  [c](const auto& o) { return o.second == c; }));
  }
};

// Classifies run_flow from (y0, xi0) for every y0 of a sorted grid.
inline RegionScan region_boundary(const FlowProblem& problem, const IllustrativeTarget& target, double xi0,
                                  const std::vector<double>& y_grid, const FlowOptions& opt = {},
                                  std::size_t threads = 1) {
  require(std::is_sorted(y_grid.begin(), y_grid.end()), "region_boundary: y_grid must be sorted");
  RegionScan scan;
  scan.outcomes.resize(y_grid.size());
  parallel_for(y_grid.size(), threads, [&](std::size_t i) {
    FlowOptions o = opt;
    o.record_every = opt.steps;
    scan.outcomes[i] = {y_grid[i], run_flow(problem, target, y_grid[i], xi0, o).terminal_class};
  });

  std::size_t first_right = scan.outcomes.size();
  while (first_right > 0 && scan.outcomes[first_right - 1].second == TerminalClass::RightMode) --first_right;
  if (first_right < scan.outcomes.size()) {
    scan.smallest_right_y0 = scan.outcomes[first_right].first;
    if (first_right > 0) {
      scan.boundary = 0.5 * (scan.outcomes[first_right - 1].first + scan.outcomes[first_right].first);
    }
  }
  for (std::size_t i = 0; i < first_right; ++i) {
    if (scan.outcomes[i].second == TerminalClass::LeftMode) scan.largest_left_y0 = scan.outcomes[i].first;
  }
  return scan;
}

// Loss values on the Cartesian grid y_values x xi_values (row-major in y).
struct LandscapeGrid {
  std::vector<double> y_values;
  std::vector<double> xi_values;
  std::vector<double> loss;

  double at(std::size_t iy, std::size_t ixi) const { return loss[iy * xi_values.size() + ixi]; }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  require(count >= 1, "linspace: count must be >= 1");
  std::vector<double> v(count);
  if (count == 1) {
    v[0] = lo;
    return v;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) v[i] = lo + step * static_cast<double>(i);
  v.back() = hi;
  return v;
}

inline LandscapeGrid landscape_grid(const FlowProblem& problem, std::pair<double, double> y_range,
                                    std::pair<double, double> xi_range, std::size_t y_resolution,
                                    std::size_t xi_resolution, std::size_t threads = 1) {
  require(y_resolution >= 2 && xi_resolution >= 2, "landscape_grid: resolution must be >= 2 per axis");
  LandscapeGrid g;
  g.y_values = linspace(y_range.first, y_range.second, y_resolution);
  g.xi_values = linspace(xi_range.first, xi_range.second, xi_resolution);
  g.loss.resize(y_resolution * xi_resolution);
  parallel_for(y_resolution, threads, [&](std::size_t iy) {
    for (std::size_t ix = 0; ix < xi_resolution; ++ix) {
      g.loss[iy * xi_resolution + ix] = problem.loss(g.y_values[iy], g.xi_values[ix]);
    }
  });
  return g;
}

}  // namespace freqbias
