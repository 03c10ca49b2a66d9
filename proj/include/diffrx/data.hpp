#pragma once

// Training data sources. The 2-d swiss roll traces
//
//   theta = 1.5 pi (1 + 2u),  u ~ U[0, 1]
//   point = (theta cos theta, theta sin theta) / scale + noise_std * N(0, I)
//
// and analogue source batches feed the quantize/modulate pipeline, so
// their values must stay inside the quantizer range [-1, 1].

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "diffrx/numerics.hpp"

namespace diffrx {

constexpr double kSwissRollThetaMin = 1.5 * M_PI;
constexpr double kSwissRollThetaMax = 4.5 * M_PI;

struct SwissRollConfig {
  std::size_t samples = 10000;
  double noise_std = 0.0;
  double scale = 10.0;
};

inline Tensor2 swiss_roll(const SwissRollConfig& cfg, RngStream& rng) {
  if (cfg.samples < 1)
    throw std::invalid_argument("swiss_roll: samples must be positive");
  if (!(cfg.scale > 0.0))
    throw std::invalid_argument("swiss_roll: scale must be positive");
  Tensor2 out(cfg.samples, 2);
  for (std::size_t r = 0; r < cfg.samples; ++r) {
    const double u = rng.next_unit();
    const double theta = 1.5 * M_PI * (1.0 + 2.0 * u);
    out(r, 0) = theta * std::cos(theta) / cfg.scale;
    out(r, 1) = theta * std::sin(theta) / cfg.scale;
  }
  if (cfg.noise_std > 0.0) {
    Tensor2 eps = sample_standard_normal(rng, cfg.samples, 2);
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] += cfg.noise_std * eps.data[i];
  }
  return out;
}

enum class SourceKind { kUniform, kSwissRoll };

// Analogue samples on [-1, 1]. The swiss-roll source uses scale 4.5 pi so
// both coordinates stay in range; points are flattened coordinate pairs
// and truncated to the requested count.
inline std::vector<double> source_batch(SourceKind kind, std::size_t count,
                                        RngStream& rng) {
  if (count < 1)
    throw std::invalid_argument("source_batch: count must be positive");
  if (kind == SourceKind::kUniform) {
    std::vector<double> out(count);
    for (double& v : out) v = -1.0 + 2.0 * rng.next_unit();
    return out;
  }
  SwissRollConfig cfg;
  cfg.samples = (count + 1) / 2;
  cfg.scale = kSwissRollThetaMax;
  Tensor2 pts = swiss_roll(cfg, rng);
  std::vector<double> out(pts.data.begin(), pts.data.begin() + count);
  return out;
}

// Distance from a point to the noise-free spiral, by dense sweep of the
// parameter range. The sweep spacing is far below the tolerances used on
// top of this oracle.
inline double swiss_roll_distance(double x, double y, double scale = 10.0,
                                  std::size_t resolution = 4096) {
  double best = 1e300;
  for (std::size_t i = 0; i <= resolution; ++i) {
    const double theta =
        kSwissRollThetaMin + (kSwissRollThetaMax - kSwissRollThetaMin) *
                                 static_cast<double>(i) /
                                 static_cast<double>(resolution);
    const double dx = x - theta * std::cos(theta) / scale;
    const double dy = y - theta * std::sin(theta) / scale;
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  return best;
}

inline double mean_swiss_roll_distance(const Tensor2& points,
                                       double scale = 10.0) {
  if (points.cols != 2)
    throw std::invalid_argument("mean_swiss_roll_distance: expected 2 columns");
  double sum = 0.0;
  for (std::size_t r = 0; r < points.rows; ++r)
    sum += swiss_roll_distance(points(r, 0), points(r, 1), scale);
  return sum / static_cast<double>(points.rows);
}

// Fraction of points within `tolerance` of the spiral.
inline double swiss_roll_within(const Tensor2& points, double tolerance,
                                double scale = 10.0) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < points.rows; ++r)
    if (swiss_roll_distance(points(r, 0), points(r, 1), scale) <= tolerance)
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(points.rows);
}

}  // namespace diffrx
