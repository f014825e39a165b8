#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "freqbias/error.hpp"
#include "freqbias/fft.hpp"
#include "freqbias/grad.hpp"
#include "freqbias/init.hpp"
#include "freqbias/lti.hpp"
#include "freqbias/numeric.hpp"
#include "freqbias/parallel.hpp"
#include "freqbias/rng.hpp"
#include "freqbias/spectral.hpp"

namespace freqbias {

// Temporal pooling of each channel output before the linear head.
//   rms:  z = sqrt(mean_t v^2 + eps) - sqrt(eps)
//   mean: z = mean_t v
// A mean pool only sees the DC bin of every channel, so it cannot separate
// waves of different frequency; rms is the default for that reason.
enum class PoolMode { rms, mean };

enum class OptimizerKind { sgd, adam };

inline constexpr double kRmsEpsilon = 1e-8;

struct ToySsmConfig {
  std::size_t channels = 16;
  std::size_t states = 32;
  std::size_t seq_len = 4096;
  double dt = 2.0 * kPi / 4096.0;
  std::size_t outputs = 3;
  double alpha = 1.0;
  double beta = 0.0;
  bool train_beta = false;
  bool use_skip = false;
  PoolMode pool = PoolMode::rms;
  std::uint64_t seed = 0;

  void validate() const {
    require(channels >= 1, "ToySsmConfig: channels must be >= 1");
    require(seq_len >= 1, "ToySsmConfig: seq_len must be >= 1");
    require(outputs >= 1, "ToySsmConfig: outputs must be >= 1");
    require(dt > 0.0 && std::isfinite(dt), "ToySsmConfig: dt must be positive");
    require(alpha > 0.0 && std::isfinite(alpha), "ToySsmConfig: alpha must be positive");
    require(std::isfinite(beta), "ToySsmConfig: beta must be finite");
  }
};

// Trainable parameters. Pole arrays are channel-major (index h * states + j);
// head is row-major channels x outputs. x_j = -exp(nu_j).
struct ToySsmParams {
  std::vector<double> nu;
  std::vector<double> y;
  std::vector<double> xi;
  std::vector<double> zeta;
  std::vector<double> d;
  std::vector<double> encoder;
  std::vector<double> head;
  std::vector<double> bias;
  double beta = 0.0;

  bool operator==(const ToySsmParams&) const = default;

  static ToySsmParams zeros_like(const ToySsmParams& p) {
    ToySsmParams z;
    z.nu.assign(p.nu.size(), 0.0);
    z.y.assign(p.y.size(), 0.0);
    z.xi.assign(p.xi.size(), 0.0);
    z.zeta.assign(p.zeta.size(), 0.0);
    z.d.assign(p.d.size(), 0.0);
    z.encoder.assign(p.encoder.size(), 0.0);
    z.head.assign(p.head.size(), 0.0);
    z.bias.assign(p.bias.size(), 0.0);
    return z;
  }
};

enum class ParamGroup { nu, y, xi, zeta, d, encoder, head, bias, beta };

inline const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::nu: return "nu";
    case ParamGroup::y: return "y";
    case ParamGroup::xi: return "xi";
    case ParamGroup::zeta: return "zeta";
    case ParamGroup::d: return "d";
    case ParamGroup::encoder: return "encoder";
    case ParamGroup::head: return "head";
    case ParamGroup::bias: return "bias";
    case ParamGroup::beta: return "beta";
  }
  return "?";
}

// Calls f(group, span) for every field of `p`, in a fixed order.
template <typename Params, typename F>
void for_each_field(Params& p, F&& f) {
  f(ParamGroup::nu, std::span(p.nu));
  f(ParamGroup::y, std::span(p.y));
  f(ParamGroup::xi, std::span(p.xi));
  f(ParamGroup::zeta, std::span(p.zeta));
  f(ParamGroup::d, std::span(p.d));
  f(ParamGroup::encoder, std::span(p.encoder));
  f(ParamGroup::head, std::span(p.head));
  f(ParamGroup::bias, std::span(p.bias));
  f(ParamGroup::beta, std::span(&p.beta, 1));
}

struct ToySsmModel {
  ToySsmConfig config;
  ToySsmParams params;

  std::size_t channels() const noexcept { return config.channels; }
  std::size_t states() const noexcept { return config.states; }
  std::size_t outputs() const noexcept { return config.outputs; }

  DiagonalLti channel(std::size_t h) const {
    require(h < channels(), "ToySsmModel: channel index out of range");
    const std::size_t n = states();
    DiagonalLti::Params p;
    p.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) p.x[j] = -std::exp(params.nu[h * n + j]);
    p.y.assign(params.y.begin() + h * n, params.y.begin() + (h + 1) * n);
    p.xi.assign(params.xi.begin() + h * n, params.xi.begin() + (h + 1) * n);
    p.zeta.assign(params.zeta.begin() + h * n, params.zeta.begin() + (h + 1) * n);
    p.d = config.use_skip ? params.d[h] : 0.0;
    return DiagonalLti(std::move(p));
  }

  void validate() const {
    config.validate();
    const std::size_t poles = channels() * states();
    require(params.nu.size() == poles && params.y.size() == poles && params.xi.size() == poles &&
                params.zeta.size() == poles,
            "ToySsmModel: pole arrays must hold channels * states entries");
    require(params.d.size() == channels() && params.encoder.size() == channels(),
            "ToySsmModel: d and encoder must hold one entry per channel");
    require(params.head.size() == channels() * outputs() && params.bias.size() == outputs(),
            "ToySsmModel: head must be channels x outputs and bias must hold outputs entries");
    bool finite = std::isfinite(params.beta);
    for_each_field(params, [&](ParamGroup, auto values) {
      for (double v : values) finite = finite && std::isfinite(v);
    });
    require(finite, "ToySsmModel: parameters must be finite");
  }
};

// Channel h starts from the alpha-scaled HiPPO system seeded with seed + h;
// encoder weights start at 1, head weights at N(0, 1/H), bias at 0.
inline ToySsmModel make_toy_model(const ToySsmConfig& cfg) {
  cfg.validate();
  ToySsmModel m;
  m.config = cfg;
  auto& p = m.params;
  const std::size_t n = cfg.states;
  for (std::size_t h = 0; h < cfg.channels; ++h) {
    if (n == 0) {
      p.d.push_back(cfg.use_skip ? Rng(cfg.seed + h).normal() : 0.0);
      continue;
    }
    const DiagonalLti sys = hippo_alpha({n, cfg.alpha, -0.5, cfg.seed + h});
    for (std::size_t j = 0; j < n; ++j) {
      p.nu.push_back(std::log(-sys.x()[j]));
      p.y.push_back(sys.y()[j]);
      p.xi.push_back(sys.xi()[j]);
      p.zeta.push_back(sys.zeta()[j]);
    }
    p.d.push_back(cfg.use_skip ? sys.d() : 0.0);
  }
  p.encoder.assign(cfg.channels, 1.0);
  Rng rng(cfg.seed ^ 0x5eedf00dULL);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.channels));
  p.head.resize(cfg.channels * cfg.outputs);
  for (auto& w : p.head) w = scale * rng.normal();
  p.bias.assign(cfg.outputs, 0.0);
  p.beta = cfg.beta;
  return m;
}

struct WaveSample {
  SequenceSignal input;
  std::vector<double> labels;
};

// u_t = sum_k a_k cos(f_k t dt), t = 0..L-1, a_k ~ U(amp_lo, amp_hi).
inline std::vector<WaveSample> make_wave_dataset(std::size_t count, std::size_t seq_len, double dt,
                                                 std::span<const double> freqs, double amp_lo,
                                                 double amp_hi, std::uint64_t seed) {
  require(seq_len >= 1, "make_wave_dataset: seq_len must be >= 1");
  require(dt > 0.0, "make_wave_dataset: dt must be positive");
  require(!freqs.empty(), "make_wave_dataset: need at least one frequency");
  require(amp_lo <= amp_hi, "make_wave_dataset: amp_range must satisfy lo <= hi");
  const double nyquist = kPi / dt;
  for (double f : freqs) {
    require(f >= 0.0 && f < nyquist, "make_wave_dataset: frequency " + std::to_string(f) +
                                         " is not below the Nyquist frequency " +
                                         std::to_string(nyquist));
  }
  Rng rng(seed);
  std::vector<WaveSample> out(count);
  for (auto& s : out) {
    s.labels.resize(freqs.size());
    for (auto& a : s.labels) a = rng.uniform(amp_lo, amp_hi);
    s.input.dt = dt;
    s.input.samples.assign(seq_len, 0.0);
    for (std::size_t t = 0; t < seq_len; ++t) {
      double v = 0.0;
      for (std::size_t k = 0; k < freqs.size(); ++k) {
        v += s.labels[k] * std::cos(freqs[k] * static_cast<double>(t) * dt);
      }
      s.input.samples[t] = v;
    }
  }
  return out;
}

// Multipliers of every channel at the non-negative bilinear nodes
// m = 0..floor(L/2); bin k of the full spectrum uses node mirrored_bin(k).
struct BankSpectrum {
  std::size_t seq_len = 0;
  std::vector<double> nodes;
  std::vector<double> weight;      // (1+|sigma|)^beta, 1 at an infinite node
  std::vector<double> log_weight;  // log(1+|sigma|), 0 at an infinite node
  std::vector<double> mult;        // channels x nodes

  std::size_t node_count() const noexcept { return nodes.size(); }
  double at(std::size_t h, std::size_t m) const { return mult[h * nodes.size() + m]; }
};

inline BankSpectrum bank_spectrum(const ToySsmModel& model) {
  const std::size_t len = model.config.seq_len;
  BankSpectrum b;
  b.seq_len = len;
  const std::size_t count = len / 2 + 1;
  b.nodes.resize(count);
  b.weight.resize(count);
  b.log_weight.resize(count);
  for (std::size_t m = 0; m < count; ++m) {
    const double s = bilinear_node(m, len, model.config.dt);
    b.nodes[m] = s;
    const bool finite = std::isfinite(s);
    b.weight[m] = finite ? sobolev_weight(model.params.beta, s) : 1.0;
    b.log_weight[m] = finite ? std::log1p(std::abs(s)) : 0.0;
  }
  b.mult.resize(model.channels() * count);
  for (std::size_t h = 0; h < model.channels(); ++h) {
    const DiagonalLti sys = model.channel(h);
    for (std::size_t m = 0; m < count; ++m) {
      b.mult[h * count + m] = eval_sobolev(sys, model.params.beta, b.nodes[m]);
    }
  }
  return b;
}

// Per-sample spectral summary: power[m] = sum of |U_k|^2 over the bins k
// that share node m, and the DC value U_0 = sum_t u_t.
struct PreparedInput {
  std::vector<double> power;
  double dc = 0.0;
};

inline PreparedInput prepare_input(const SequenceSignal& u, const FftPlan& plan) {
  u.validate();
  require(plan.size() == u.size(), "prepare_input: FFT plan length does not match the signal");
  const std::size_t len = u.size();
  const auto spectrum = plan.forward_real(u.samples);
  PreparedInput p;
  p.power.assign(len / 2 + 1, 0.0);
  for (std::size_t k = 0; k < len; ++k) p.power[mirrored_bin(k, len)] += std::norm(spectrum[k]);
  p.dc = spectrum[0].real();
  return p;
}

namespace detail {

inline void check_input_length(const ToySsmModel& model, const SequenceSignal& u) {
  require(u.size() == model.config.seq_len,
          "ToySsmModel: input length " + std::to_string(u.size()) + " does not match seq_len " +
              std::to_string(model.config.seq_len));
}

// Pooled channel features z_h and, for rms pooling, the mean squares ms_h.
inline void pooled_features(const ToySsmModel& model, const BankSpectrum& bank, const PreparedInput& in,
                            std::span<double> z, std::span<double> ms) {
  const double len = static_cast<double>(bank.seq_len);
  const std::size_t count = bank.node_count();
  for (std::size_t h = 0; h < model.channels(); ++h) {
    const double e = model.params.encoder[h];
    if (model.config.pool == PoolMode::mean) {
      z[h] = e * bank.at(h, 0) * in.dc / len;
      ms[h] = 0.0;
      continue;
    }
    const double sum = pairwise_sum(count, [&](std::size_t m) {
      const double v = bank.at(h, m);
      return in.power[m] * v * v;
    });
    ms[h] = e * e * sum / (len * len);
    z[h] = std::sqrt(ms[h] + kRmsEpsilon) - std::sqrt(kRmsEpsilon);
  }
}

inline void apply_head(const ToySsmModel& model, std::span<const double> z, std::span<double> out) {
  const std::size_t k_out = model.outputs();
  for (std::size_t k = 0; k < k_out; ++k) {
    double acc = model.params.bias[k];
    for (std::size_t h = 0; h < model.channels(); ++h) acc += model.params.head[h * k_out + k] * z[h];
    out[k] = acc;
  }
}

}  // namespace detail

// Fast forward pass on a prepared input (Parseval form of the pooled outputs).
inline std::vector<double> forward_prepared(const ToySsmModel& model, const BankSpectrum& bank,
                                            const PreparedInput& in) {
  std::vector<double> z(model.channels()), ms(model.channels()), out(model.outputs());
  detail::pooled_features(model, bank, in, z, ms);
  detail::apply_head(model, z, out);
  return out;
}

// Reference forward pass: every channel runs the spectral pipeline on the
// encoder-scaled input and is pooled in the time domain.
inline std::vector<double> forward(const ToySsmModel& model, const SequenceSignal& u) {
  model.validate();
  u.validate();
  detail::check_input_length(model, u);
  const FftPlan plan(u.size());
  const double len = static_cast<double>(u.size());
  std::vector<double> z(model.channels());
  for (std::size_t h = 0; h < model.channels(); ++h) {
    SequenceSignal scaled = u;
    for (auto& v : scaled.samples) v *= model.params.encoder[h];
    const auto out = apply(model.channel(h), SobolevFilter{model.params.beta}, scaled, plan);
    if (model.config.pool == PoolMode::mean) {
      z[h] = pairwise_sum(out.samples) / len;
    } else {
      const double ms = pairwise_sum(out.size(), [&](std::size_t t) { return out.samples[t] * out.samples[t]; }) / len;
      z[h] = std::sqrt(ms + kRmsEpsilon) - std::sqrt(kRmsEpsilon);
    }
  }
  std::vector<double> y(model.outputs());
  detail::apply_head(model, z, y);
  return y;
}

namespace detail {

// Adds dL/dM[h][m] (given in `dmult`, channels x nodes) into the pole,
// skip and beta gradients.
inline void chain_multiplier_gradient(const ToySsmModel& model, const BankSpectrum& bank,
                                      std::span<const double> dmult, ToySsmParams& grad) {
  const std::size_t n = model.states();
  const std::size_t count = bank.node_count();
  for (std::size_t h = 0; h < model.channels(); ++h) {
    const std::span<const double> dm = dmult.subspan(h * count, count);
    double g_d = 0.0;
    double g_beta = 0.0;
    for (std::size_t m = 0; m < count; ++m) {
      if (dm[m] == 0.0) continue;
      if (!std::isfinite(bank.nodes[m])) {
        g_d += dm[m];
        continue;
      }
      g_d += dm[m] * bank.weight[m];
      g_beta += dm[m] * bank.log_weight[m] * bank.at(h, m);
    }
    if (model.config.use_skip) grad.d[h] += g_d;
    if (model.config.train_beta) grad.beta += g_beta;

    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t idx = h * n + j;
      const double x = -std::exp(model.params.nu[idx]);
      const double y = model.params.y[idx];
      const double xi = model.params.xi[idx];
      const double zeta = model.params.zeta[idx];
      double g_x = 0.0, g_y = 0.0, g_xi = 0.0, g_zeta = 0.0;
      for (std::size_t m = 0; m < count; ++m) {
        if (dm[m] == 0.0 || !std::isfinite(bank.nodes[m])) continue;
        const double scale = dm[m] * bank.weight[m];
        const auto p = pole_partials(x, y, xi, zeta, bank.nodes[m]);
        g_x += scale * p.dx;
        g_y += scale * p.dy;
        g_xi += scale * p.dxi;
        g_zeta += scale * p.dzeta;
      }
      grad.nu[idx] += g_x * x;
      grad.y[idx] += g_y;
      grad.xi[idx] += g_xi;
      grad.zeta[idx] += g_zeta;
    }
  }
}

struct BatchView {
  std::vector<const PreparedInput*> inputs;
  std::vector<const std::vector<double>*> labels;
};

// Gradient of the batch loss (1/B) sum_b (1/K) sum_k (yhat_bk - a_bk)^2.
inline ToySsmParams batch_gradient(const ToySsmModel& model, const BankSpectrum& bank, const BatchView& batch,
                                   double* loss_out, std::size_t threads) {
  const std::size_t count_b = batch.inputs.size();
  require(count_b >= 1, "backward: batch must be nonempty");
  const std::size_t H = model.channels();
  const std::size_t K = model.outputs();
  const std::size_t nodes = bank.node_count();
  const double len = static_cast<double>(bank.seq_len);
  const double scale = 2.0 / (static_cast<double>(count_b) * static_cast<double>(K));

  // Per-sample features and upstream gradients, in parallel.
  std::vector<double> z(count_b * H), ms(count_b * H), dz(count_b * H), resid(count_b * K), sq(count_b);
  parallel_for(count_b, threads, [&](std::size_t b) {
    const std::span<double> zb(z.data() + b * H, H);
    const std::span<double> msb(ms.data() + b * H, H);
    pooled_features(model, bank, *batch.inputs[b], zb, msb);
    std::vector<double> out(K);
    apply_head(model, zb, out);
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double r = out[k] - (*batch.labels[b])[k];
      resid[b * K + k] = r;
      s += r * r;
    }
    sq[b] = s;
    for (std::size_t h = 0; h < H; ++h) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += model.params.head[h * K + k] * scale * resid[b * K + k];
      dz[b * H + h] = acc;
    }
  });
  if (loss_out) *loss_out = pairwise_sum(sq) / (static_cast<double>(count_b) * static_cast<double>(K));

  ToySsmParams grad = ToySsmParams::zeros_like(model.params);
  for (std::size_t b = 0; b < count_b; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      const double g = scale * resid[b * K + k];
      grad.bias[k] += g;
      for (std::size_t h = 0; h < H; ++h) grad.head[h * K + k] += z[b * H + h] * g;
    }
  }

  std::vector<double> dmult(H * nodes, 0.0);
  if (model.config.pool == PoolMode::mean) {
    for (std::size_t b = 0; b < count_b; ++b) {
      const double dc = batch.inputs[b]->dc;
      for (std::size_t h = 0; h < H; ++h) {
        const double g = dz[b * H + h] * dc / len;
        grad.encoder[h] += g * bank.at(h, 0);
        dmult[h * nodes] += g * model.params.encoder[h];
      }
    }
  } else {
    // dL/dms_h per sample, then dL/dM_hm = 2 e_h^2 M_hm / L^2 sum_b dms_bh power_bm.
    std::vector<double> acc(H * nodes, 0.0);
    for (std::size_t b = 0; b < count_b; ++b) {
      const auto& power = batch.inputs[b]->power;
      for (std::size_t h = 0; h < H; ++h) {
        const double dms = dz[b * H + h] / (2.0 * std::sqrt(ms[b * H + h] + kRmsEpsilon));
        if (dms == 0.0) continue;
        double* row = acc.data() + h * nodes;
        for (std::size_t m = 0; m < nodes; ++m) row[m] += dms * power[m];
      }
    }
    for (std::size_t h = 0; h < H; ++h) {
      const double e = model.params.encoder[h];
      double g_e = 0.0;
      for (std::size_t m = 0; m < nodes; ++m) {
        const double v = bank.at(h, m);
        const double a = acc[h * nodes + m];
        g_e += a * v * v;
        dmult[h * nodes + m] = 2.0 * e * e * v * a / (len * len);
      }
      grad.encoder[h] += 2.0 * e * g_e / (len * len);
    }
  }
  chain_multiplier_gradient(model, bank, dmult, grad);
  return grad;
}

}  // namespace detail

// Gradient of the batch mean-squared label error with respect to every
// model parameter. Groups that are frozen (d without skip, beta when not
// trainable) get zero gradient.
inline ToySsmParams backward(const ToySsmModel& model, std::span<const WaveSample> batch, double* loss_out = nullptr,
                             std::size_t threads = 1) {
  model.validate();
  require(!batch.empty(), "backward: batch must be nonempty");
  const FftPlan plan(model.config.seq_len);
  std::vector<PreparedInput> prepared(batch.size());
  detail::BatchView view;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    detail::check_input_length(model, batch[b].input);
    require(batch[b].labels.size() == model.outputs(), "backward: label count does not match outputs");
    prepared[b] = prepare_input(batch[b].input, plan);
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    view.inputs.push_back(&prepared[b]);
    view.labels.push_back(&batch[b].labels);
  }
  return detail::batch_gradient(model, bank_spectrum(model), view, loss_out, threads);
}

inline double batch_loss(const ToySsmModel& model, std::span<const WaveSample> batch) {
  require(!batch.empty(), "batch_loss: batch must be nonempty");
  double total = 0.0;
  for (const auto& s : batch) {
    const auto out = forward(model, s.input);
    for (std::size_t k = 0; k < out.size(); ++k) total += (out[k] - s.labels[k]) * (out[k] - s.labels[k]);
  }
  return total / (static_cast<double>(batch.size()) * static_cast<double>(model.outputs()));
}

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  // Learning rate for xi, zeta, d, encoder, head and bias.
  double lr_fast = 1e-2;
  // Learning rate for nu, y and beta.
  double lr_slow = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const {
    require(lr_fast >= 0.0 && lr_slow >= 0.0, "TrainConfig: learning rates must be >= 0");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  // Mean |a_k - yhat_k| per label over the evaluation set.
  std::vector<double> label_error;
};

// ||theta0 - theta_final|| / ||theta0|| per parameter group.
struct ParamChange {
  double x = 0.0;
  double y = 0.0;
  double xi_zeta = 0.0;
  double d = 0.0;
  double encoder = 0.0;
  double head = 0.0;
  double beta = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  ParamChange change;
};

namespace detail {

inline double relative_change(std::span<const double> before, std::span<const double> after) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    num += (after[i] - before[i]) * (after[i] - before[i]);
    den += before[i] * before[i];
  }
  if (num == 0.0) return 0.0;
  return std::sqrt(num) / std::sqrt(den);
}

inline bool slow_group(ParamGroup g) {
  return g == ParamGroup::nu || g == ParamGroup::y || g == ParamGroup::beta;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const ToySsmParams& shape)
      : cfg_(cfg), m_(ToySsmParams::zeros_like(shape)), v_(ToySsmParams::zeros_like(shape)) {}

  void step(ToySsmParams& params, ToySsmParams& grad) {
    ++t_;
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    std::vector<std::span<double>> ps, gs, ms, vs;
    std::vector<ParamGroup> groups;
    for_each_field(params, [&](ParamGroup g, std::span<double> s) { groups.push_back(g); ps.push_back(s); });
    for_each_field(grad, [&](ParamGroup, std::span<double> s) { gs.push_back(s); });
    for_each_field(m_, [&](ParamGroup, std::span<double> s) { ms.push_back(s); });
    for_each_field(v_, [&](ParamGroup, std::span<double> s) { vs.push_back(s); });
    for (std::size_t f = 0; f < groups.size(); ++f) {
      const double lr = slow_group(groups[f]) ? cfg_.lr_slow : cfg_.lr_fast;
      for (std::size_t i = 0; i < ps[f].size(); ++i) {
        const double g = gs[f][i];
        if (cfg_.optimizer == OptimizerKind::sgd) {
          ps[f][i] -= lr * g;
          continue;
        }
        ms[f][i] = b1 * ms[f][i] + (1.0 - b1) * g;
        vs[f][i] = b2 * vs[f][i] + (1.0 - b2) * g * g;
        ps[f][i] -= lr * (ms[f][i] / c1) / (std::sqrt(vs[f][i] / c2) + cfg_.adam_eps);
      }
    }
  }

 private:
  TrainConfig cfg_;
  ToySsmParams m_;
  ToySsmParams v_;
  std::size_t t_ = 0;
};

inline std::vector<double> pole_reals(const ToySsmParams& p) {
  std::vector<double> x(p.nu.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -std::exp(p.nu[i]);
  return x;
}

inline std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> v(a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

}  // namespace detail

inline ParamChange parameter_change(const ToySsmParams& before, const ToySsmParams& after) {
  ParamChange c;
  c.x = detail::relative_change(detail::pole_reals(before), detail::pole_reals(after));
  c.y = detail::relative_change(before.y, after.y);
  c.xi_zeta = detail::relative_change(detail::concat(before.xi, before.zeta), detail::concat(after.xi, after.zeta));
  c.d = detail::relative_change(before.d, after.d);
  c.encoder = detail::relative_change(before.encoder, after.encoder);
  c.head = detail::relative_change(detail::concat(before.head, before.bias), detail::concat(after.head, after.bias));
  c.beta = detail::relative_change(std::span(&before.beta, 1), std::span(&after.beta, 1));
  return c;
}

// Mean |a_k - yhat_k| per label.
inline std::vector<double> label_errors(const ToySsmModel& model, std::span<const WaveSample> samples,
                                        std::size_t threads = 1) {
  require(!samples.empty(), "label_errors: empty sample set");
  const BankSpectrum bank = bank_spectrum(model);
  const FftPlan plan(model.config.seq_len);
  const std::size_t K = model.outputs();
  std::vector<double> err(samples.size() * K);
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto out = forward_prepared(model, bank, prepare_input(samples[i].input, plan));
    for (std::size_t k = 0; k < K; ++k) err[i * K + k] = std::abs(out[k] - samples[i].labels[k]);
  });
  std::vector<double> mean(K);
  for (std::size_t k = 0; k < K; ++k) {
    mean[k] = pairwise_sum(samples.size(), [&](std::size_t i) { return err[i * K + k]; }) /
              static_cast<double>(samples.size());
  }
  return mean;
}

// Mini-batch training on the wave regression task. Batches are drawn from a
// per-epoch shuffle seeded by cfg.seed; the log is bit-identical for equal
// inputs. Throws DivergenceError (with the epoch index) on a non-finite loss.
inline TrainLog train(ToySsmModel& model, std::span<const WaveSample> train_set,
                      std::span<const WaveSample> eval_set, const TrainConfig& cfg) {
  model.validate();
  cfg.validate();
  require(!train_set.empty(), "train: empty training set");
  for (const auto& s : train_set) {
    detail::check_input_length(model, s.input);
    require(s.labels.size() == model.outputs(), "train: label count does not match outputs");
  }
  const FftPlan plan(model.config.seq_len);
  std::vector<PreparedInput> prepared(train_set.size());
  parallel_for(train_set.size(), cfg.threads,
               [&](std::size_t i) { prepared[i] = prepare_input(train_set[i].input, plan); });

  const ToySsmParams initial = model.params;
  detail::Optimizer opt(cfg, model.params);
  TrainLog log;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed * 0x9e3779b97f4a7c15ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_u64() % i]);
    }
    std::vector<double> batch_losses;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      detail::BatchView view;
      for (std::size_t i = start; i < end; ++i) {
        view.inputs.push_back(&prepared[order[i]]);
        view.labels.push_back(&train_set[order[i]].labels);
      }
      double loss = 0.0;
      auto grad = detail::batch_gradient(model, bank_spectrum(model), view, &loss, cfg.threads);
      if (!std::isfinite(loss)) throw DivergenceError("train: non-finite loss", epoch);
      batch_losses.push_back(loss);
      opt.step(model.params, grad);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = pairwise_sum(batch_losses) / static_cast<double>(batch_losses.size());
    rec.label_error = label_errors(model, eval_set.empty() ? train_set : eval_set, cfg.threads);
    if (!std::isfinite(rec.loss)) throw DivergenceError("train: non-finite loss", epoch);
    log.epochs.push_back(std::move(rec));
  }
  log.change = parameter_change(initial, model.params);
  return log;
}

// Wave-magnitude regression: inputs sum_k a_k cos(f_k t dt), labels a_k.
struct WaveTaskConfig {
  ToySsmConfig model;
  TrainConfig train;
  std::vector<double> freqs{1.0, 16.0, 256.0};
  std::size_t train_samples = 2048;
  std::size_t eval_samples = 256;
  double amp_lo = 0.0;
  double amp_hi = 1.0;
  // The evaluation set uses data_seed + 1.
  std::uint64_t data_seed = 1;
};

struct WaveTaskResult {
  ToySsmModel model;
  std::vector<double> initial_error;
  TrainLog log;
};

inline WaveTaskResult run_wave_task(const WaveTaskConfig& cfg) {
  require(cfg.model.outputs == cfg.freqs.size(), "run_wave_task: model outputs must equal the number of freqs");
  const auto train_set = make_wave_dataset(cfg.train_samples, cfg.model.seq_len, cfg.model.dt, cfg.freqs,
                                           cfg.amp_lo, cfg.amp_hi, cfg.data_seed);
  const auto eval_set = make_wave_dataset(cfg.eval_samples, cfg.model.seq_len, cfg.model.dt, cfg.freqs,
                                          cfg.amp_lo, cfg.amp_hi, cfg.data_seed + 1);
  WaveTaskResult r;
  r.model = make_toy_model(cfg.model);
  r.initial_error = label_errors(r.model, eval_set);
  r.log = train(r.model, train_set, eval_set, cfg.train);
  return r;
}

// ---------------------------------------------------------------------------
// Stripe pass-rate experiment.

// Row-major h x w image flattened to a length h*w sequence (index r*w + c).
//   horizontal: bands constant along each row; intensity cos(2 pi p r / h).
//               Energy sits near bin p (low frequency).
//   vertical:   bands constant down each column; intensity cos(2 pi q c / w).
//               A pure sinusoid at bin q*h (high frequency).
enum class StripeOrientation { horizontal, vertical };

inline SequenceSignal stripe_image(std::size_t height, std::size_t width, StripeOrientation orientation,
                                   std::size_t cycles, double dt) {
  require(height >= 1 && width >= 1, "stripe_image: image must be nonempty");
  SequenceSignal img{std::vector<double>(height * width), dt};
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double phase = orientation == StripeOrientation::horizontal
                               ? 2.0 * kPi * static_cast<double>(cycles * r) / static_cast<double>(height)
                               : 2.0 * kPi * static_cast<double>(cycles * c) / static_cast<double>(width);
      img.samples[r * width + c] = std::cos(phase);
    }
  }
  return img;
}

// Stripe noise: a random superposition of stripe images with cycle counts in
// [cycles_lo, cycles_hi], amplitudes N(0, 1) and uniform phases.
inline SequenceSignal stripe_noise(std::size_t height, std::size_t width, StripeOrientation orientation,
                                   std::size_t cycles_lo, std::size_t cycles_hi, double dt, Rng& rng) {
  require(height >= 1 && width >= 1, "stripe_noise: image must be nonempty");
  require(cycles_lo <= cycles_hi, "stripe_noise: cycles_lo must not exceed cycles_hi");
  const std::size_t period = orientation == StripeOrientation::horizontal ? height : width;
  SequenceSignal img{std::vector<double>(height * width, 0.0), dt};
  for (std::size_t cycles = cycles_lo; cycles <= cycles_hi; ++cycles) {
    const double amp = rng.normal();
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const std::size_t pos = orientation == StripeOrientation::horizontal ? r : c;
        img.samples[r * width + c] +=
            amp * std::cos(2.0 * kPi * static_cast<double>(cycles * pos) / static_cast<double>(period) + phase);
      }
    }
  }
  return img;
}

// Clean training image: a Gaussian random field with amplitude spectrum
// |k|^(-decay) over 2-D wavenumbers k != 0, normalized to unit RMS.
// decay = 1 gives the 1/|k|^2 power law typical of natural images.
inline SequenceSignal natural_image(std::size_t height, std::size_t width, double dt, Rng& rng,
                                    double decay = 1.0) {
  require(height >= 1 && width >= 1, "natural_image: image must be nonempty");
  const auto wrap = [](std::size_t k, std::size_t n) {
    return static_cast<double>(k <= n / 2 ? k : n - k);
  };
  using cplx = FftPlan::cplx;
  std::vector<cplx> spec(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double kr = wrap(r, height);
      const double kc = wrap(c, width);
      const double k2 = kr * kr + kc * kc;
      const double re = rng.normal();
      const double im = rng.normal();
      spec[r * width + c] = k2 == 0.0 ? cplx{} : std::pow(k2, -0.5 * decay) * cplx{re, im};
    }
  }
  const FftPlan row_plan(width);
  const FftPlan col_plan(height);
  for (std::size_t r = 0; r < height; ++r) row_plan.inverse(std::span(spec).subspan(r * width, width));
  std::vector<cplx> column(height);
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t r = 0; r < height; ++r) column[r] = spec[r * width + c];
    col_plan.inverse(column);
    for (std::size_t r = 0; r < height; ++r) spec[r * width + c] = column[r];
  }
  SequenceSignal img{std::vector<double>(height * width), dt};
  for (std::size_t i = 0; i < spec.size(); ++i) img.samples[i] = spec[i].real();
  const double ms = pairwise_sum(img.size(), [&](std::size_t i) { return img.samples[i] * img.samples[i]; }) /
                    static_cast<double>(img.size());
  if (ms > 0.0) {
    const double scale = 1.0 / std::sqrt(ms);
    for (auto& v : img.samples) v *= scale;
  }
  return img;
}

// Skip-free linear autoencoder built from the LTI bank: the reconstruction is
// sum_h head_h iFFT(FFT(e_h u) o M_h), i.e. one real even multiplier
// T_k = sum_h head_h e_h M_h(k). Uses the first head column.
inline SequenceSignal reconstruct(const ToySsmModel& model, const SequenceSignal& u) {
  model.validate();
  detail::check_input_length(model, u);
  const FftPlan plan(u.size());
  SequenceSignal out{std::vector<double>(u.size(), 0.0), u.dt};
  const std::size_t K = model.outputs();
  for (std::size_t h = 0; h < model.channels(); ++h) {
    SequenceSignal scaled = u;
    for (auto& v : scaled.samples) v *= model.params.encoder[h];
    const auto v = apply(model.channel(h), SobolevFilter{model.params.beta}, scaled, plan);
    const double w = model.params.head[h * K];
    for (std::size_t t = 0; t < u.size(); ++t) out.samples[t] += w * v.samples[t];
  }
  return out;
}

// Full-batch Adam on the mean reconstruction error (1/L) sum_t (out - u)^2.
// By Parseval it depends on the images only through their mean power per node.
inline std::vector<double> train_autoencoder(ToySsmModel& model, std::span<const SequenceSignal> images,
                                             const TrainConfig& cfg) {
  model.validate();
  cfg.validate();
  require(!images.empty(), "train_autoencoder: no images");
  const FftPlan plan(model.config.seq_len);
  const std::size_t nodes = model.config.seq_len / 2 + 1;
  std::vector<double> power(nodes, 0.0);
  for (const auto& img : images) {
    detail::check_input_length(model, img);
    const auto p = prepare_input(img, plan);
    for (std::size_t m = 0; m < nodes; ++m) power[m] += p.power[m];
  }
  const double len = static_cast<double>(model.config.seq_len);
  const double norm = 1.0 / (static_cast<double>(images.size()) * len * len);
  for (auto& p : power) p *= norm;

  const std::size_t H = model.channels();
  const std::size_t K = model.outputs();
  detail::Optimizer opt(cfg, model.params);
  std::vector<double> losses;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const BankSpectrum bank = bank_spectrum(model);
    std::vector<double> total(nodes, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      const double c = model.params.head[h * K] * model.params.encoder[h];
      for (std::size_t m = 0; m < nodes; ++m) total[m] += c * bank.at(h, m);
    }
    const double loss = pairwise_sum(nodes, [&](std::size_t m) {
      return power[m] * (total[m] - 1.0) * (total[m] - 1.0);
    });
    if (!std::isfinite(loss)) throw DivergenceError("train_autoencoder: non-finite loss", epoch);
    losses.push_back(loss);

    ToySsmParams grad = ToySsmParams::zeros_like(model.params);
    std::vector<double> dmult(H * nodes);
    for (std::size_t h = 0; h < H; ++h) {
      const double w = model.params.head[h * K];
      const double e = model.params.encoder[h];
      double g_w = 0.0, g_e = 0.0;
      for (std::size_t m = 0; m < nodes; ++m) {
        const double dt_m = 2.0 * power[m] * (total[m] - 1.0);
        g_w += dt_m * e * bank.at(h, m);
        g_e += dt_m * w * bank.at(h, m);
        dmult[h * nodes + m] = dt_m * w * e;
      }
      grad.head[h * K] = g_w;
      grad.encoder[h] = g_e;
    }
    detail::chain_multiplier_gradient(model, bank, dmult, grad);
    opt.step(model.params, grad);
  }
  return losses;
}

struct StripeExperimentConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 4;
  std::size_t states = 32;
  // Cycle range of both stripe noises (horizontal = low, vertical = high).
  std::size_t cycles_lo = 6;
  std::size_t cycles_hi = 10;
  double dt = 0.01;
  // Amplitude spectrum exponent of the clean images.
  double image_decay = 1.0;
  std::size_t train_images = 64;
  std::size_t epochs = 10;
  // Independently seeded models per cell; the cell reports the geometric mean ratio.
  std::size_t replicates = 8;
  double lr_fast = 1e-2;
  double lr_slow = 1e-3;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

// Amplitude pass rate of a noise-only input: ||out|| / ||in||.
inline double energy_pass_rate(const ToySsmModel& model, const SequenceSignal& noise) {
  const auto out = reconstruct(model, noise);
  const double e_in = pairwise_sum(noise.size(), [&](std::size_t t) { return noise.samples[t] * noise.samples[t]; });
  const double e_out = pairwise_sum(out.size(), [&](std::size_t t) { return out.samples[t] * out.samples[t]; });
  require(e_in > 0.0, "energy_pass_rate: zero-energy input");
  return std::sqrt(e_out / e_in);
}

// Ratio of the low- to high-frequency stripe pass rates of a trained
// autoencoder, one entry per (alpha, beta) cell, rows indexed by alpha.
inline std::vector<std::vector<double>> stripe_passrate_experiment(std::span<const double> alpha_grid,
                                                                   std::span<const double> beta_grid,
                                                                   const StripeExperimentConfig& cfg) {
  require(!alpha_grid.empty() && !beta_grid.empty(), "stripe_passrate_experiment: grids must be nonempty");
  const std::size_t len = cfg.height * cfg.width;
  const double dt = cfg.dt;
  Rng rng(cfg.seed);
  std::vector<SequenceSignal> images;
  for (std::size_t i = 0; i < cfg.train_images; ++i) images.push_back(natural_image(cfg.height, cfg.width, dt, rng, cfg.image_decay));
  const auto low = stripe_noise(cfg.height, cfg.width, StripeOrientation::horizontal, cfg.cycles_lo, cfg.cycles_hi, dt, rng);
  const auto high = stripe_noise(cfg.height, cfg.width, StripeOrientation::vertical, cfg.cycles_lo, cfg.cycles_hi, dt, rng);

  require(cfg.replicates >= 1, "stripe_passrate_experiment: replicates must be >= 1");
  const std::size_t cells = alpha_grid.size() * beta_grid.size();
  std::vector<double> log_ratio(cells * cfg.replicates);
  parallel_for(log_ratio.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t cell = job / cfg.replicates;
    const std::size_t rep = job % cfg.replicates;
    ToySsmConfig mc;
    mc.channels = cfg.channels;
    mc.states = cfg.states;
    mc.seq_len = len;
    mc.dt = dt;
    mc.outputs = 1;
    mc.alpha = alpha_grid[cell / beta_grid.size()];
    mc.beta = beta_grid[cell % beta_grid.size()];
    mc.use_skip = false;
    mc.seed = cfg.seed + 1000 * rep;
    ToySsmModel model = make_toy_model(mc);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.lr_fast = cfg.lr_fast;
    tc.lr_slow = cfg.lr_slow;
    train_autoencoder(model, images, tc);
    log_ratio[job] = std::log(energy_pass_rate(model, low) / energy_pass_rate(model, high));
  });

  std::vector<std::vector<double>> ratio(alpha_grid.size(), std::vector<double>(beta_grid.size()));
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double mean = pairwise_sum(cfg.replicates, [&](std::size_t r) {
                          return log_ratio[cell * cfg.replicates + r];
                        }) / static_cast<double>(cfg.replicates);
    ratio[cell / beta_grid.size()][cell % beta_grid.size()] = std::exp(mean);
  }
  return ratio;
}

}  // namespace freqbias
