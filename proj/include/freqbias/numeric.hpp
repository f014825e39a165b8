#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

namespace freqbias {

inline constexpr double kPi = std::numbers::pi;

// Deterministic pairwise summation of term(0) + ... + term(n-1). The split
// points depend only on n, so results are run-to-run identical.
template <typename Term>
double pairwise_sum(std::size_t first, std::size_t last, const Term& term) {
  constexpr std::size_t kBlock = 64;
  if (last - first <= kBlock) {
    double acc = 0.0;
    for (std::size_t i = first; i < last; ++i) acc += term(i);
    return acc;
  }
  const std::size_t mid = first + (last - first) / 2;
  return pairwise_sum(first, mid, term) + pairwise_sum(mid, last, term);
}

template <typename Term>
double pairwise_sum(std::size_t n, const Term& term) {
  return pairwise_sum(std::size_t{0}, n, term);
}

inline double pairwise_sum(std::span<const double> values) {
  return pairwise_sum(values.size(), [&](std::size_t i) { return values[i]; });
}

// (1 + |s|)^beta; the Sobolev reweighting of the frequency axis.
inline double sobolev_weight(double beta, double s) {
  if (beta == 0.0) return 1.0;
  return std::pow(1.0 + std::abs(s), beta);
}

}  // namespace freqbias
