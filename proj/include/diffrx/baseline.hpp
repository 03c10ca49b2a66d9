#pragma once

// Benchmark receiver: a plain ReLU regression network mapping a received
// (Re, Im) pair to an estimate of the clean scaled symbol sqrt(p) s. It is
// trained per operating point on freshly simulated transmissions, so every
// (order, SNR, impairment) configuration gets its own weights.

#include <cstddef>
#include <vector>

#include "diffrx/channel.hpp"
#include "diffrx/modem.hpp"
#include "diffrx/neural.hpp"
#include "diffrx/numerics.hpp"

namespace diffrx {

inline std::size_t default_baseline_iterations(unsigned order) {
  return order == 256 ? 30000 : 5000;
}

struct BaselineConfig {
  unsigned order = 64;
  double snr_db = 0.0;
  ChannelConfig channel;        // noise_variance is derived from snr_db
  std::size_t iterations = 0;  // 0 selects the per-order default
  std::size_t batch_size = 256;
  double learning_rate = 0.01;
  std::size_t hidden_dim = 64;
  std::size_t hidden_layers = 2;
};

inline Mlp make_baseline_dnn(std::size_t hidden_dim, std::size_t hidden_layers,
                             RngStream& rng) {
  MlpConfig cfg;
  cfg.input_dim = 2;
  cfg.hidden_dim = hidden_dim;
  cfg.hidden_layers = hidden_layers;
  cfg.time_steps = 0;
  cfg.activation = Activation::kRelu;
  return Mlp(cfg, rng);
}

struct BaselineTrainResult {
  Mlp model;
  double final_loss = 0.0;
};

inline BaselineTrainResult train_baseline(const BaselineConfig& cfg,
                                          RngStream& rng) {
  const QamSpec qam = make_qam(cfg.order);
  const ComplexBatch points = constellation(qam);
  ChannelConfig chan = cfg.channel;
  chan.noise_variance = noise_variance_for_snr(chan.power, cfg.snr_db);
  const double sqrt_p = std::sqrt(chan.power);

  const std::size_t iters =
      cfg.iterations ? cfg.iterations : default_baseline_iterations(cfg.order);
  BaselineTrainResult out;
  out.model = make_baseline_dnn(cfg.hidden_dim, cfg.hidden_layers, rng);
  AdamConfig acfg;
  acfg.learning_rate = cfg.learning_rate;
  AdamOptimizer adam(out.model, acfg);

  const std::size_t n = cfg.batch_size;
  ComplexBatch symbols(n);
  const std::vector<int> no_ts;
  for (std::size_t it = 1; it <= iters; ++it) {
    for (auto& s : symbols) s = points[rng.next_below(points.size())];
    const ComplexBatch h = draw_fading(chan, n, rng);
    const ChannelDraw draw = transmit(symbols, chan, h, rng);
    const Tensor2 y = to_symbol_rows(draw.received);

    Mlp::Cache cache;
    Tensor2 est = out.model.forward(y, no_ts, cache);
    Tensor2 upstream(n, 2);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(est.data.size());
    for (std::size_t k = 0; k < n; ++k) {
      const double tr = sqrt_p * symbols[k].real();
      const double ti = sqrt_p * symbols[k].imag();
      const double dr = est(k, 0) - tr;
      const double di = est(k, 1) - ti;
      loss += dr * dr + di * di;
      upstream(k, 0) = 2.0 * dr * inv;
      upstream(k, 1) = 2.0 * di * inv;
    }
    loss *= inv;
    if (!std::isfinite(loss)) throw TrainingDiverged(it);
    adam.step(out.model, out.model.backward(no_ts, cache, upstream));
    out.final_loss = loss;
  }
  if (!out.model.parameters_finite()) throw TrainingDiverged(iters);
  return out;
}

inline Tensor2 baseline_infer(const Mlp& model, const Tensor2& received_rows) {
  return model.forward(received_rows, {});
}

}  // namespace diffrx
