#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/fft.hpp"
#include "freqbias/init.hpp"
#include "freqbias/lti.hpp"

namespace freqbias {

struct SequenceSignal {
  std::vector<double> samples;
  double dt = 1.0;

  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    require(!samples.empty(), "SequenceSignal: must contain at least one sample");
    require(dt > 0.0, "SequenceSignal: dt must be positive");
  }
};

struct SobolevFilter {
  double beta = 0.0;
};

// Bin m of a length-L DFT is paired with the non-negative node of its
// frequency magnitude, sigma_{min(m, L-m)}. The multiplier is therefore even
// in the bin index and the pipeline maps real input to real output.
inline std::size_t mirrored_bin(std::size_t bin, std::size_t seq_len) {
  return bin == 0 ? 0 : std::min(bin, seq_len - bin);
}

// Real multiplier applied to every DFT bin: G~^(beta)(i sigma) at the
// mirrored bilinear node; the even-length bin at infinity multiplies by d.
inline std::vector<double> transfer_multiplier(const DiagonalLti& sys, const SobolevFilter& filter,
                                               std::size_t seq_len, double dt) {
  require(seq_len >= 1 && dt > 0.0, "transfer_multiplier: seq_len >= 1 and dt > 0 required");
  std::vector<double> m(seq_len);
  const std::size_t half = seq_len / 2;
  for (std::size_t k = 0; k <= half; ++k) {
    m[k] = eval_sobolev(sys, filter.beta, bilinear_node(k, seq_len, dt));
  }
  for (std::size_t k = half + 1; k < seq_len; ++k) m[k] = m[seq_len - k];
  return m;
}

// y = iFFT(FFT(u) o G~^(beta)(sigma)); forward transform unnormalized,
// inverse carries 1/L.
inline SequenceSignal apply(const DiagonalLti& sys, const SobolevFilter& filter,
                            const SequenceSignal& u, const FftPlan& plan) {
  u.validate();
  require(plan.size() == u.size(), "apply: FFT plan length does not match the signal");
  const std::size_t len = u.size();
  const auto mult = transfer_multiplier(sys, filter, len, u.dt);
  auto spectrum = plan.forward_real(u.samples);
  for (std::size_t k = 0; k < len; ++k) spectrum[k] *= mult[k];
  plan.inverse(spectrum);
  SequenceSignal out{std::vector<double>(len), u.dt};
  for (std::size_t t = 0; t < len; ++t) out.samples[t] = spectrum[t].real();
  return out;
}

inline SequenceSignal apply(const DiagonalLti& sys, const SobolevFilter& filter,
                            const SequenceSignal& u) {
  u.validate();
  return apply(sys, filter, u, FftPlan(u.size()));
}

// Amplitude ratio of a single DFT bin through the pipeline, |G~^(beta)(i sigma)|.
inline double pass_rate(const DiagonalLti& sys, const SobolevFilter& filter, std::size_t freq_bin,
                        std::size_t seq_len, double dt) {
  require(freq_bin < seq_len, "pass_rate: freq_bin must be < seq_len");
  require(dt > 0.0, "pass_rate: dt must be positive");
  const std::size_t node = mirrored_bin(freq_bin, seq_len);
  return std::abs(eval_sobolev(sys, filter.beta, bilinear_node(node, seq_len, dt)));
}

}  // namespace freqbias
