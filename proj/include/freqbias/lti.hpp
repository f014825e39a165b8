#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/numeric.hpp"

namespace freqbias {

// Stable diagonal SISO LTI system in partial-fraction form:
//
//   G(is) = sum_j (xi_j + i zeta_j) / (-x_j + i (s - y_j)) + d,
//
// where a_j = x_j + i y_j are the diagonal entries of A and
// c_j = xi_j + i zeta_j the entries of B o C^T. Every x_j must be strictly
// negative. n = 0 is allowed and describes a pure skip system.
class DiagonalLti {
 public:
  struct Params {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> xi;
    std::vector<double> zeta;
    double d = 0.0;

    bool operator==(const Params&) const = default;
  };

  DiagonalLti() = default;

  explicit DiagonalLti(Params params) : p_(std::move(params)) { validate(); }

  static DiagonalLti skip(double d) { return DiagonalLti(Params{{}, {}, {}, {}, d}); }

  std::size_t size() const noexcept { return p_.x.size(); }
  bool empty() const noexcept { return p_.x.empty(); }

  std::span<const double> x() const noexcept { return p_.x; }
  std::span<const double> y() const noexcept { return p_.y; }
  std::span<const double> xi() const noexcept { return p_.xi; }
  std::span<const double> zeta() const noexcept { return p_.zeta; }
  double d() const noexcept { return p_.d; }

  const Params& params() const noexcept { return p_; }

  // |c_j| = sqrt(xi_j^2 + zeta_j^2).
  double residue_modulus(std::size_t j) const {
    return std::hypot(p_.xi[j], p_.zeta[j]);
  }

  double max_abs_y() const {
    double m = 0.0;
    for (double v : p_.y) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const DiagonalLti&, const DiagonalLti&) = default;

 private:
  void validate() const {
    const std::size_t n = p_.x.size();
    require(p_.y.size() == n && p_.xi.size() == n && p_.zeta.size() == n,
            "DiagonalLti: x, y, xi, zeta must have identical length");
    for (std::size_t j = 0; j < n; ++j) {
      require(p_.x[j] < 0.0,
              "DiagonalLti: x[" + std::to_string(j) + "] must be strictly negative (stability)");
      require(std::isfinite(p_.y[j]) && std::isfinite(p_.xi[j]) && std::isfinite(p_.zeta[j]),
              "DiagonalLti: parameters must be finite");
    }
    require(std::isfinite(p_.d), "DiagonalLti: d must be finite");
  }

  Params p_;
};

// Interval [lo, hi] of the frequency axis; either end may be infinite.
struct FrequencyWindow {
  double lo;
  double hi;

  FrequencyWindow(double lo_, double hi_) : lo(lo_), hi(hi_) {
    require(lo < hi, "FrequencyWindow: lo must be smaller than hi");
  }

  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

// Complex transfer function G(is). At s = +-inf every partial fraction
// vanishes and the value is d.
inline std::complex<double> eval_complex(const DiagonalLti& sys, double s) {
  std::complex<double> acc{sys.d(), 0.0};
  if (!std::isfinite(s)) return acc;
  const auto x = sys.x();
  const auto y = sys.y();
  const auto xi = sys.xi();
  const auto zeta = sys.zeta();
  for (std::size_t j = 0; j < sys.size(); ++j) {
    acc += std::complex<double>(xi[j], zeta[j]) / std::complex<double>(-x[j], s - y[j]);
  }
  return acc;
}

// Real-part transfer function
//   G~(is) = sum_j [zeta_j (s - y_j) - xi_j x_j] / [x_j^2 + (s - y_j)^2] + d.
inline double eval_real(const DiagonalLti& sys, double s) {
  if (!std::isfinite(s)) return sys.d();
  const auto x = sys.x();
  const auto y = sys.y();
  const auto xi = sys.xi();
  const auto zeta = sys.zeta();
  double acc = 0.0;
  for (std::size_t j = 0; j < sys.size(); ++j) {
    const double u = s - y[j];
    acc += (zeta[j] * u - xi[j] * x[j]) / (x[j] * x[j] + u * u);
  }
  return acc + sys.d();
}

// Sobolev-filtered response (1 + |s|)^beta G~(is).
//
// At an infinite node the filter is not applied and the value is d: this is
// the convention the discrete pipeline uses for the even-length pole at
// infinity.
inline double eval_sobolev(const DiagonalLti& sys, double beta, double s) {
  if (!std::isfinite(s)) return sys.d();
  return sobolev_weight(beta, s) * eval_real(sys, s);
}

}  // namespace freqbias
