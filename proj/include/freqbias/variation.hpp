#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/lti.hpp"
#include "freqbias/numeric.hpp"

namespace freqbias {

inline constexpr std::size_t kDefaultTvGridPoints = 200'000;

enum class TailSide { left, right };

namespace detail {

// Limit of (1+|s|)^beta G~(is) as |s| -> inf, for beta <= 0.
inline double filtered_limit_at_infinity(const DiagonalLti& sys, double beta) {
  return beta == 0.0 ? sys.d() : 0.0;
}

}  // namespace detail

// Numeric total variation of (1+|s|)^beta G~(is) over `window`.
//
// The window is mapped to theta = atan(s) and sampled uniformly in theta, so
// infinite endpoints become the finite angles -+pi/2. Each partition sum is a
// lower bound of the true variation; it is non-decreasing under refinement
// of the partition (for example grid_points -> 2 * grid_points - 1).
//
// An unbounded window with beta > 0 is rejected: the filtered response does
// not have a finite limit at infinity in general.
inline double total_variation_numeric(const DiagonalLti& sys, double beta,
                                      const FrequencyWindow& window,
                                      std::size_t grid_points = kDefaultTvGridPoints) {
  require(grid_points >= 2, "total_variation_numeric: grid_points must be >= 2");
  require(std::isfinite(beta), "total_variation_numeric: beta must be finite");
  require(window.bounded() || beta <= 0.0,
          "total_variation_numeric: unbounded window requires beta <= 0");

  const auto value_at = [&](double s) {
    if (!std::isfinite(s)) return detail::filtered_limit_at_infinity(sys, beta);
    return sobolev_weight(beta, s) * eval_real(sys, s);
  };

  const double theta_lo = std::atan(window.lo);
  const double theta_hi = std::atan(window.hi);
  const double step = (theta_hi - theta_lo) / static_cast<double>(grid_points - 1);

  std::vector<double> f(grid_points);
  f.front() = value_at(window.lo);
  f.back() = value_at(window.hi);
  for (std::size_t k = 1; k + 1 < grid_points; ++k) {
    f[k] = value_at(std::tan(theta_lo + step * static_cast<double>(k)));
  }
  return pairwise_sum(grid_points - 1,
                      [&](std::size_t k) { return std::abs(f[k + 1] - f[k]); });
}

// Closed-form tail bounds for the total variation of G~ outside [-B, B]:
//   left:  V_{-inf}^{-B} <= sum_j |c_j| / |y_j + B|
//   right: V_{B}^{inf}   <= sum_j |c_j| / |y_j - B|
// valid for B > max_j |y_j|.
inline double tv_tail_bound(const DiagonalLti& sys, double cutoff_b, TailSide side) {
  require(std::isfinite(cutoff_b), "tv_tail_bound: cutoff must be finite");
  if (sys.empty()) return 0.0;
  require(cutoff_b > sys.max_abs_y(),
          "tv_tail_bound: cutoff B = " + std::to_string(cutoff_b) +
              " must exceed max_j |y_j| = " + std::to_string(sys.max_abs_y()));
  const auto y = sys.y();
  return pairwise_sum(sys.size(), [&](std::size_t j) {
    const double gap = side == TailSide::left ? y[j] + cutoff_b : y[j] - cutoff_b;
    return sys.residue_modulus(j) / std::abs(gap);
  });
}

// Probabilistic tail bound for the HiPPO initialization with standard normal
// residues: with probability >= 1 - delta both tails satisfy
//   V <= sqrt(2n) (sqrt(n) + sqrt(ln(1/delta))) / (B - n/2),   B > n pi / 2.
inline double hippo_tail_bound(std::size_t n, double cutoff_b, double delta) {
  require(n >= 1, "hippo_tail_bound: n must be >= 1");
  require(delta > 0.0 && delta < 1.0, "hippo_tail_bound: delta must lie in (0, 1)");
  const double nd = static_cast<double>(n);
  require(cutoff_b > nd * kPi / 2.0,
          "hippo_tail_bound: cutoff B must exceed n*pi/2 = " + std::to_string(nd * kPi / 2.0));
  return std::sqrt(2.0 * nd) * (std::sqrt(nd) + std::sqrt(std::log(1.0 / delta))) /
         (cutoff_b - nd / 2.0);
}

}  // namespace freqbias
