#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/numeric.hpp"

namespace freqbias {

// Discrete Fourier transform of arbitrary length.
//
//   forward:  X_k = sum_t x_t exp(-2 pi i k t / L)        (unnormalized)
//   inverse:  x_t = (1/L) sum_k X_k exp(+2 pi i k t / L)
//
// Powers of two use an iterative radix-2 kernel; other lengths go through
// Bluestein's chirp-z identity on a padded power-of-two transform. A plan is
// immutable after construction and may be shared across threads.
class FftPlan {
 public:
  using cplx = std::complex<double>;

  explicit FftPlan(std::size_t len) : len_(len) {
    require(len >= 1, "FftPlan: length must be >= 1");
    if (std::has_single_bit(len_)) {
      twiddles_ = make_twiddles(len_);
      return;
    }
    padded_ = std::bit_ceil(2 * len_ - 1);
    twiddles_ = make_twiddles(padded_);
    // chirp_k = exp(-i pi k^2 / L); k^2 is reduced mod 2L to keep the phase exact.
    chirp_.resize(len_);
    const std::size_t two_len = 2 * len_;
    for (std::size_t k = 0; k < len_; ++k) {
      const std::size_t k2 = (k * k) % two_len;
      const double phase = -kPi * static_cast<double>(k2) / static_cast<double>(len_);
      chirp_[k] = {std::cos(phase), std::sin(phase)};
    }
    std::vector<cplx> b(padded_, cplx{0.0, 0.0});
    b[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < len_; ++k) {
      b[k] = std::conj(chirp_[k]);
      b[padded_ - k] = std::conj(chirp_[k]);
    }
    radix2(b, twiddles_, false);
    chirp_spectrum_ = std::move(b);
  }

  std::size_t size() const noexcept { return len_; }

  void forward(std::span<cplx> data) const { transform(data, false); }

  void inverse(std::span<cplx> data) const {
    transform(data, true);
    const double scale = 1.0 / static_cast<double>(len_);
    for (auto& v : data) v *= scale;
  }

  std::vector<cplx> forward_real(std::span<const double> samples) const {
    std::vector<cplx> out(samples.begin(), samples.end());
    forward(out);
    return out;
  }

 private:
  static std::vector<cplx> make_twiddles(std::size_t n) {
    std::vector<cplx> w(n / 2 + (n == 1));
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double phase = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
      w[k] = {std::cos(phase), std::sin(phase)};
    }
    return w;
  }

  // In-place radix-2 transform; `conj_twiddle` selects the inverse sign
  // (no scaling).
  static void radix2(std::span<cplx> a, const std::vector<cplx>& w, bool conj_twiddle) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const cplx tw = conj_twiddle ? std::conj(w[k * stride]) : w[k * stride];
          const cplx t = a[start + k + half] * tw;
          a[start + k + half] = a[start + k] - t;
          a[start + k] += t;
        }
      }
    }
  }

  void transform(std::span<cplx> data, bool inverse) const {
    require(data.size() == len_, "FftPlan: data length does not match plan");
    if (len_ == 1) return;
    if (chirp_.empty()) {
      radix2(data, twiddles_, inverse);
      return;
    }
    // Inverse via conjugation: ifft(x) * L = conj(fft(conj(x))).
    std::vector<cplx> a(padded_, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < len_; ++k) {
      const cplx v = inverse ? std::conj(data[k]) : data[k];
      a[k] = v * chirp_[k];
    }
    radix2(a, twiddles_, false);
    for (std::size_t k = 0; k < padded_; ++k) a[k] *= chirp_spectrum_[k];
    radix2(a, twiddles_, true);
    const double scale = 1.0 / static_cast<double>(padded_);
    for (std::size_t k = 0; k < len_; ++k) {
      const cplx v = a[k] * scale * chirp_[k];
      data[k] = inverse ? std::conj(v) : v;
    }
  }

  std::size_t len_;
  std::size_t padded_ = 0;
  std::vector<cplx> twiddles_;
  std::vector<cplx> chirp_;
  std::vector<cplx> chirp_spectrum_;
};

}  // namespace freqbias
