#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/lti.hpp"
#include "freqbias/numeric.hpp"
#include "freqbias/rng.hpp"

namespace freqbias {

struct InitConfig {
  std::size_t n = 64;
  double alpha = 1.0;
  double real_part = -0.5;
  std::uint64_t seed = 0;

  void validate() const {
    require(n >= 1, "InitConfig: n must be >= 1");
    require(alpha > 0.0 && std::isfinite(alpha), "InitConfig: alpha must be positive");
    require(real_part < 0.0, "InitConfig: real_part must be negative");
  }
};

// Imaginary part of the j-th (1-based) scaled HiPPO eigenvalue,
// (-1)^j floor(j/2) alpha pi.
inline double hippo_imag(std::size_t j, double alpha) {
  const double magnitude = static_cast<double>(j / 2) * alpha * kPi;
  return (j % 2 == 0) ? magnitude : -magnitude;
}

// Alpha-scaled HiPPO initialization
//   a_j = real_part + i (-1)^j floor(j/2) alpha pi,  j = 1..n,
// with xi_j, zeta_j ~ N(0,1) drawn pole by pole (xi_1, zeta_1, xi_2, ...)
// and d ~ N(0,1) drawn last, all from one seeded stream.
inline DiagonalLti hippo_alpha(const InitConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  DiagonalLti::Params p;
  p.x.assign(cfg.n, cfg.real_part);
  p.y.resize(cfg.n);
  p.xi.resize(cfg.n);
  p.zeta.resize(cfg.n);
  for (std::size_t j = 0; j < cfg.n; ++j) {
    p.y[j] = hippo_imag(j + 1, cfg.alpha);
    p.xi[j] = rng.normal();
    p.zeta[j] = rng.normal();
  }
  p.d = rng.normal();
  return DiagonalLti(std::move(p));
}

// Continuous frequencies seen by a length-L FFT through the bilinear map
//   s_j = (2/dt) (w_j - 1) / (w_j + 1) = i (2/dt) tan(pi (j-1) / L).
// nodes[m] holds sigma for DFT bin m. For even L the bin m = L/2 sits at
// infinity and is stored as +inf.
struct FrequencyGrid {
  std::vector<double> nodes;
  double dt = 1.0;

  std::size_t size() const noexcept { return nodes.size(); }

  static bool is_infinite(double node) { return !std::isfinite(node); }

  // Largest finite |sigma| on the grid.
  double max_finite() const {
    double m = 0.0;
    for (double v : nodes)
      if (std::isfinite(v)) m = std::max(m, std::abs(v));
    return m;
  }
};

inline double bilinear_node(std::size_t bin, std::size_t seq_len, double dt) {
  if (2 * bin == seq_len) return std::numeric_limits<double>::infinity();
  return (2.0 / dt) *
         std::tan(kPi * static_cast<double>(bin) / static_cast<double>(seq_len));
}

inline FrequencyGrid frequency_nodes(std::size_t seq_len, double dt) {
  require(seq_len >= 1, "frequency_nodes: seq_len must be >= 1");
  require(dt > 0.0, "frequency_nodes: dt must be positive");
  FrequencyGrid grid;
  grid.dt = dt;
  grid.nodes.resize(seq_len);
  for (std::size_t m = 0; m < seq_len; ++m) grid.nodes[m] = bilinear_node(m, seq_len, dt);
  return grid;
}

// Rule II cap on alpha: 4 tan((1 - (L-1)/L) pi / 2) / (n pi dt).
inline double rule2_alpha_max(std::size_t n, std::size_t seq_len, double dt) {
  require(n >= 1 && seq_len >= 1 && dt > 0.0, "rule2_alpha_max: arguments must be positive");
  const double len = static_cast<double>(seq_len);
  return 4.0 * std::tan(kPi / (2.0 * len)) / (static_cast<double>(n) * kPi * dt);
}

// Largest Im(a) that stays below the top `top_fraction` of the bilinear
// Fourier nodes: (2/pi) atan(Im(a) dt / 4) <= 1 - top_fraction.
inline double aliasing_imag_cap(double dt, double top_fraction) {
  require(top_fraction > 0.0 && top_fraction < 1.0,
          "aliasing_imag_cap: top_fraction must lie in (0, 1)");
  require(dt > 0.0, "aliasing_imag_cap: dt must be positive");
  return (4.0 / dt) * std::tan(kPi * (1.0 - top_fraction) / 2.0);
}

// Rule I guideline: converts the aliasing cap on Im(a) to alpha through
// max_j |y_j| ~ n pi alpha / 2.
inline double rule1_alpha_guideline(std::size_t n, double dt, double top_fraction) {
  require(n >= 1, "rule1_alpha_guideline: n must be >= 1");
  return 2.0 * aliasing_imag_cap(dt, top_fraction) / (static_cast<double>(n) * kPi);
}

struct ScalingReport {
  std::size_t pole_index = 0;
  double pole_real = 0.0;
  double pole_imag = 0.0;
  double g_norm_2 = 0.0;
  double g_norm_inf = 0.0;
  // |y| dt / ||g||_2
  double rule1_ratio = 0.0;
  // 1 / (1 + ||y| - (2/dt) tan((1 - (L-1)/L) pi / 2)|)
  double inf_norm_expression = 0.0;
  // expression / ||g||_inf
  double rule2_ratio = 0.0;
  // 1 / sqrt(x^2 + (|y| - sigma_max)^2), reported only when |y| lies beyond
  // every finite node; an upper bound on ||g||_inf there.
  std::optional<double> inf_norm_envelope;
  double rule2_alpha_max = 0.0;
  double aliasing_alpha_max = 0.0;
  // |g_k| per DFT bin (0 at an infinite node).
  std::vector<double> g_abs;
};

// Norms of the sampled single-pole response g_k = 1 / (i sigma_k - a) for the
// selected pole of `sys`.
inline ScalingReport scaling_report(std::size_t pole_index, const DiagonalLti& sys,
                                    const FrequencyGrid& grid) {
  require(pole_index < sys.size(), "scaling_report: pole index out of range");
  require(grid.size() >= 1, "scaling_report: empty grid");
  const double x = sys.x()[pole_index];
  const double y = sys.y()[pole_index];
  const std::complex<double> a{x, y};
  const std::size_t len = grid.size();

  ScalingReport r;
  r.pole_index = pole_index;
  r.pole_real = x;
  r.pole_imag = y;
  r.g_abs.resize(len);
  for (std::size_t k = 0; k < len; ++k) {
    const double sigma = grid.nodes[k];
    r.g_abs[k] = FrequencyGrid::is_infinite(sigma)
                     ? 0.0
                     : std::abs(1.0 / (std::complex<double>(0.0, sigma) - a));
  }
  r.g_norm_2 = std::sqrt(pairwise_sum(len, [&](std::size_t k) { return r.g_abs[k] * r.g_abs[k]; }));
  r.g_norm_inf = *std::max_element(r.g_abs.begin(), r.g_abs.end());
  r.rule1_ratio = std::abs(y) * grid.dt / r.g_norm_2;

  const double small_node = (2.0 / grid.dt) * std::tan(kPi / (2.0 * static_cast<double>(len)));
  r.inf_norm_expression = 1.0 / (1.0 + std::abs(std::abs(y) - small_node));
  r.rule2_ratio = r.inf_norm_expression / r.g_norm_inf;

  const double sigma_max = grid.max_finite();
  if (std::abs(y) > sigma_max) {
    const double gap = std::abs(y) - sigma_max;
    r.inf_norm_envelope = 1.0 / std::sqrt(x * x + gap * gap);
  }
  r.rule2_alpha_max = rule2_alpha_max(std::max<std::size_t>(sys.size(), 1), len, grid.dt);
  r.aliasing_alpha_max = rule1_alpha_guideline(std::max<std::size_t>(sys.size(), 1), grid.dt, 0.05);
  return r;
}

}  // namespace freqbias
