#pragma once

// Complex baseband link with transceiver distortion. Each symbol sees
//
//   y_k = h_k (sqrt(p) s_k + eta_t_k) + eta_r_k + n_k
//
// where eta_t ~ CN(0, kappa_t p) models transmitter distortion, the
// receiver term obeys eta_r_k ~ CN(0, kappa_r p |h_k|^2), and n is either
// circular Gaussian CN(0, delta^2) or a complex Laplacian with independent
// real and imaginary parts carrying delta^2 / 2 each. Conditioned on the
// fading draw the aggregate corruption y - sqrt(p) h s is zero mean with
// covariance p (kappa_t + kappa_r) G + delta^2 I, G = diag(|h_k|^2).

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "diffrx/numerics.hpp"

namespace diffrx {

using ComplexBatch = std::vector<std::complex<double>>;

enum class Fading { kNone, kRayleigh };
enum class NoiseKind { kGaussian, kLaplacian };

struct ChannelConfig {
  double power = 1.0;  // transmit power p
  double kappa_t = 0.0;
  double kappa_r = 0.0;
  double noise_variance = 0.0;  // delta^2, total over both quadratures
  Fading fading = Fading::kNone;
  NoiseKind noise_kind = NoiseKind::kGaussian;
};

inline double noise_variance_for_snr(double power, double snr_db) {
  return power * std::pow(10.0, -snr_db / 10.0);
}

// One circular draw with total variance `var` split evenly across
// quadratures.
inline std::complex<double> draw_circular(RngStream& rng, double var,
                                          NoiseKind kind) {
  if (var < 0.0)
    throw std::invalid_argument("draw_circular: negative variance");
  const double axis = var / 2.0;
  if (kind == NoiseKind::kGaussian) {
    auto [re, im] = rng.next_normal_pair();
    const double s = std::sqrt(axis);
    return {s * re, s * im};
  }
  return {next_laplace(rng, axis), next_laplace(rng, axis)};
}

inline ComplexBatch draw_fading(const ChannelConfig& cfg, std::size_t count,
                                RngStream& rng) {
  ComplexBatch h(count, {1.0, 0.0});
  if (cfg.fading == Fading::kRayleigh)
    for (auto& v : h) v = draw_circular(rng, 1.0, NoiseKind::kGaussian);
  return h;
}

struct ChannelDraw {
  ComplexBatch received;
  ComplexBatch tx_distortion;
  ComplexBatch rx_distortion;
  ComplexBatch noise;
};

inline ChannelDraw transmit(const ComplexBatch& symbols,
                            const ChannelConfig& cfg, const ComplexBatch& h,
                            RngStream& rng) {
  if (h.size() != symbols.size())
    throw std::invalid_argument("transmit: one fading draw per symbol");
  const double sqrt_p = std::sqrt(cfg.power);
  ChannelDraw out;
  out.received.resize(symbols.size());
  out.tx_distortion.resize(symbols.size());
  out.rx_distortion.resize(symbols.size());
  out.noise.resize(symbols.size());
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const double gain2 = std::norm(h[k]);
    out.tx_distortion[k] =
        draw_circular(rng, cfg.kappa_t * cfg.power, NoiseKind::kGaussian);
    out.rx_distortion[k] = draw_circular(
        rng, cfg.kappa_r * cfg.power * gain2, NoiseKind::kGaussian);
    out.noise[k] = draw_circular(rng, cfg.noise_variance, cfg.noise_kind);
    out.received[k] = h[k] * (sqrt_p * symbols[k] + out.tx_distortion[k]) +
                      out.rx_distortion[k] + out.noise[k];
  }
  return out;
}

// [Re(y_1) ... Re(y_K) Im(y_1) ... Im(y_K)]
inline std::vector<double> stack_real(const ComplexBatch& y) {
  std::vector<double> out(2 * y.size());
  for (std::size_t k = 0; k < y.size(); ++k) {
    out[k] = y[k].real();
    out[k + y.size()] = y[k].imag();
  }
  return out;
}

inline ComplexBatch unstack_real(const std::vector<double>& v) {
  if (v.size() % 2 != 0)
    throw std::invalid_argument("unstack_real: odd length");
  const std::size_t k = v.size() / 2;
  ComplexBatch out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = {v[i], v[i + k]};
  return out;
}

// One (Re, Im) row per symbol, the layout consumed by the 2-d receivers.
inline Tensor2 to_symbol_rows(const ComplexBatch& y) {
  Tensor2 out(y.size(), 2);
  for (std::size_t k = 0; k < y.size(); ++k) {
    out(k, 0) = y[k].real();
    out(k, 1) = y[k].imag();
  }
  return out;
}

inline ComplexBatch from_symbol_rows(const Tensor2& rows) {
  if (rows.cols != 2)
    throw std::invalid_argument("from_symbol_rows: expected two columns");
  ComplexBatch out(rows.rows);
  for (std::size_t k = 0; k < rows.rows; ++k)
    out[k] = {rows(k, 0), rows(k, 1)};
  return out;
}

// Covariance of the aggregate corruption conditioned on the fading draw,
// as a complex diagonal.
inline std::vector<double> corruption_variances(const ComplexBatch& h,
                                                const ChannelConfig& cfg) {
  std::vector<double> out(h.size());
  for (std::size_t k = 0; k < h.size(); ++k)
    out[k] = cfg.power * (cfg.kappa_t + cfg.kappa_r) * std::norm(h[k]) +
             cfg.noise_variance;
  return out;
}

// Real-stacked covariance of [Re(u); Im(u)] for the circular corruption u:
// one half of [[Re S, -Im S], [Im S, Re S]] with S the complex covariance.
// S is diagonal and real here, so the result is diagonal.
inline Tensor2 stacked_covariance(const ComplexBatch& h,
                                  const ChannelConfig& cfg) {
  const std::vector<double> s = corruption_variances(h, cfg);
  const std::size_t k = s.size();
  Tensor2 out(2 * k, 2 * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    out(i, i) = s[i] / 2.0;
    out(i + k, i + k) = s[i] / 2.0;
  }
  return out;
}

}  // namespace diffrx
