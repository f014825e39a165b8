#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/lti.hpp"
#include "freqbias/numeric.hpp"

namespace freqbias {

// Uniform trapezoid rule on [-s_max, s_max] with `points` nodes.
struct QuadratureSpec {
  enum class Scheme { trapezoid };

  double s_max = 100.0;
  std::size_t points = (std::size_t{1} << 17) + 1;
  Scheme scheme = Scheme::trapezoid;

  void validate() const {
    require(s_max > 0.0 && std::isfinite(s_max), "QuadratureSpec: s_max must be positive");
    require(points >= 3, "QuadratureSpec: points must be >= 3");
  }

  double spacing() const { return 2.0 * s_max / static_cast<double>(points - 1); }
  double node(std::size_t q) const { return -s_max + spacing() * static_cast<double>(q); }
  double weight(std::size_t q) const {
    return (q == 0 || q + 1 == points) ? 0.5 * spacing() : spacing();
  }

  // s_max = 100 (max_j |y_j| + 1).
  static QuadratureSpec default_for(const DiagonalLti& sys) {
    QuadratureSpec q;
    q.s_max = 100.0 * (sys.max_abs_y() + 1.0);
    return q;
  }
};

template <typename F>
double integrate(const QuadratureSpec& quad, const F& f) {
  quad.validate();
  return pairwise_sum(quad.points, [&](std::size_t q) { return quad.weight(q) * f(quad.node(q)); });
}

// Vector-valued deterministic pairwise accumulation: add_terms(i, out) adds
// the contribution of term i into `out` (length dim).
template <typename AddTerms>
std::vector<double> pairwise_accumulate(std::size_t first, std::size_t last, std::size_t dim,
                                        const AddTerms& add_terms) {
  constexpr std::size_t kBlock = 64;
  if (last - first <= kBlock) {
    std::vector<double> acc(dim, 0.0);
    for (std::size_t i = first; i < last; ++i) add_terms(i, std::span<double>(acc));
    return acc;
  }
  const std::size_t mid = first + (last - first) / 2;
  auto lhs = pairwise_accumulate(first, mid, dim, add_terms);
  const auto rhs = pairwise_accumulate(mid, last, dim, add_terms);
  for (std::size_t k = 0; k < dim; ++k) lhs[k] += rhs[k];
  return lhs;
}

// dG~(is)/dy_j:
//   K_j(s) = [zeta_j ((s-y_j)^2 - x_j^2) - 2 xi_j x_j (s-y_j)] / [x_j^2 + (s-y_j)^2]^2
inline double kernel_k(const DiagonalLti& sys, std::size_t j, double s) {
  require(j < sys.size(), "kernel_k: pole index " + std::to_string(j) + " out of range");
  const double x = sys.x()[j];
  const double u = s - sys.y()[j];
  const double den = x * x + u * u;
  return (sys.zeta()[j] * (u * u - x * x) - 2.0 * sys.xi()[j] * x * u) / (den * den);
}

inline double kernel_k_sobolev(const DiagonalLti& sys, std::size_t j, double beta, double s) {
  return sobolev_weight(beta, s) * kernel_k(sys, j, s);
}

// Partial derivatives of the j-th partial fraction of G~ at frequency s.
struct PolePartials {
  double dx;
  double dy;
  double dxi;
  double dzeta;
};

inline PolePartials pole_partials(double x, double y, double xi, double zeta, double s) {
  const double u = s - y;
  const double den = x * x + u * u;
  const double den2 = den * den;
  return {
      (xi * (x * x - u * u) - 2.0 * x * zeta * u) / den2,
      (zeta * (u * u - x * x) - 2.0 * xi * x * u) / den2,
      -x / den,
      u / den,
  };
}

// Functional derivative dL/dG~^(beta)(is) together with its declared growth
// exponent p, |r(s)| = O(|s|^p). The gradient integrals converge only for
// p < 1 - beta.
struct ResidualFunction {
  std::function<double(double)> value;
  double growth_exponent = 0.0;
};

// Truncation bound of the two tails |s| > s_max for an integrand bounded by
// scale * |s|^(p - 2 + beta).
inline double tail_truncation_bound(double scale, double growth_exponent, double beta,
                                    double s_max) {
  const double e = growth_exponent - 1.0 + beta;
  require(e < 0.0, "tail_truncation_bound: integrand tail is not integrable");
  return 2.0 * scale * std::pow(s_max, e) / (-e);
}

namespace detail {
inline void check_residual_hypothesis(const ResidualFunction& r, double beta) {
  require(static_cast<bool>(r.value), "residual function is empty");
  require(r.growth_exponent < 1.0 - beta,
          "residual growth exponent p = " + std::to_string(r.growth_exponent) +
              " must satisfy p < 1 - beta = " + std::to_string(1.0 - beta));
}
}  // namespace detail

// dL/dy_j = int r(s) K_j^(beta)(s) ds, trapezoid on [-s_max, s_max].
inline double grad_y_quadrature(const DiagonalLti& sys, std::size_t j, double beta,
                                const ResidualFunction& residual, const QuadratureSpec& quad) {
  require(j < sys.size(), "grad_y_quadrature: pole index out of range");
  detail::check_residual_hypothesis(residual, beta);
  return integrate(quad, [&](double s) { return residual.value(s) * kernel_k_sobolev(sys, j, beta, s); });
}

struct GradientRecord {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> xi;
  std::vector<double> zeta;
  double d = 0.0;

  static GradientRecord zeros(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
            std::vector<double>(n, 0.0), 0.0};
  }
};

// Gradient of the loss with respect to every parameter of `sys`, each as
// int r(s) (1+|s|)^beta dG~(is)/dtheta ds.
inline GradientRecord grad_all_params(const DiagonalLti& sys, double beta,
                                      const ResidualFunction& residual,
                                      const QuadratureSpec& quad) {
  detail::check_residual_hypothesis(residual, beta);
  quad.validate();
  const std::size_t n = sys.size();
  const auto x = sys.x();
  const auto y = sys.y();
  const auto xi = sys.xi();
  const auto zeta = sys.zeta();

  const auto sums = pairwise_accumulate(0, quad.points, 4 * n + 1, [&](std::size_t q, std::span<double> acc) {
    const double s = quad.node(q);
    const double scaled = quad.weight(q) * residual.value(s) * sobolev_weight(beta, s);
    if (scaled == 0.0) return;
    for (std::size_t j = 0; j < n; ++j) {
      const auto p = pole_partials(x[j], y[j], xi[j], zeta[j], s);
      acc[j] += scaled * p.dx;
      acc[n + j] += scaled * p.dy;
      acc[2 * n + j] += scaled * p.dxi;
      acc[3 * n + j] += scaled * p.dzeta;
    }
    acc[4 * n] += scaled;
  });

  GradientRecord g = GradientRecord::zeros(n);
  for (std::size_t j = 0; j < n; ++j) {
    g.x[j] = sums[j];
    g.y[j] = sums[n + j];
    g.xi[j] = sums[2 * n + j];
    g.zeta[j] = sums[3 * n + j];
  }
  g.d = sums[4 * n];
  return g;
}

// Residual of the squared H^beta distance to a target F~:
//   L = int (1+|s|)^(2 beta) (F~ - G~)^2 ds,  r(s) = -2 (1+|s|)^beta (F~ - G~)(s).
// The difference of two proper rational responses decays like 1/|s|, so the
// declared growth exponent is beta - 1.
inline ResidualFunction sobolev_residual(std::function<double(double)> target, const DiagonalLti& sys,
                                         double beta) {
  return {[target = std::move(target), sys, beta](double s) {
            return -2.0 * sobolev_weight(beta, s) * (target(s) - eval_real(sys, s));
          },
          beta - 1.0};
}

inline double sobolev_loss(const std::function<double(double)>& target, const DiagonalLti& sys,
                           double beta, const QuadratureSpec& quad) {
  return integrate(quad, [&](double s) {
    const double r = sobolev_weight(beta, s) * (target(s) - eval_real(sys, s));
    return r * r;
  });
}

}  // namespace freqbias
