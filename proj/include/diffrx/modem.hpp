#pragma once

// Source-to-symbol pipeline: a mid-rise uniform quantizer turns analogue
// values on [-1, 1] into bits, and a Gray-coded square QAM mapper turns
// bits into unit-average-energy constellation points. Bits are serialized
// MSB first; each complex symbol consumes its in-phase bits before its
// quadrature bits.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "diffrx/channel.hpp"
#include "diffrx/numerics.hpp"

namespace diffrx {

inline std::uint32_t gray_encode(std::uint32_t i) { return i ^ (i >> 1); }

inline std::uint32_t gray_decode(std::uint32_t g) {
  std::uint32_t i = g;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) i ^= i >> shift;
  return i;
}

struct QamSpec {
  unsigned order;          // M
  unsigned bits_per_axis;  // log2(M) / 2
  unsigned levels;         // sqrt(M) amplitudes per axis
  double scale;            // normalizes average symbol energy to one
};

inline QamSpec make_qam(unsigned order) {
  if (order != 16 && order != 64 && order != 256)
    throw std::invalid_argument("make_qam: order must be 16, 64 or 256");
  QamSpec q;
  q.order = order;
  unsigned bits = 0;
  while ((1u << bits) < order) ++bits;
  q.bits_per_axis = bits / 2;
  q.levels = 1u << q.bits_per_axis;
  // Raw amplitudes are the odd integers +-1, ..., +-(levels - 1); their
  // per-axis mean square is (levels^2 - 1) / 3, so the complex mean energy
  // is 2 (M - 1) / 3 before scaling.
  q.scale = std::sqrt(3.0 / (2.0 * (order - 1)));
  return q;
}

struct Quantizer {
  unsigned bits;
  double lo = -1.0;
  double hi = 1.0;
};

inline Quantizer make_quantizer(unsigned bits, double lo = -1.0,
                                double hi = 1.0) {
  if (bits < 1 || bits > 16)
    throw std::invalid_argument("make_quantizer: bits outside [1, 16]");
  if (!(lo < hi)) throw std::invalid_argument("make_quantizer: empty range");
  return {bits, lo, hi};
}

// Mid-rise cells: index floor((x - lo) / step) clamped to the edge cells,
// serialized MSB first.
inline std::vector<std::uint8_t> quantize(const std::vector<double>& values,
                                          const Quantizer& q) {
  const std::uint32_t cells = 1u << q.bits;
  const double step = (q.hi - q.lo) / cells;
  std::vector<std::uint8_t> bits;
  bits.reserve(values.size() * q.bits);
  for (double x : values) {
    double cell = std::floor((x - q.lo) / step);
    if (cell < 0.0) cell = 0.0;
    if (cell > cells - 1) cell = cells - 1;
    const auto idx = static_cast<std::uint32_t>(cell);
    for (unsigned b = q.bits; b-- > 0;)
      bits.push_back(static_cast<std::uint8_t>((idx >> b) & 1u));
  }
  return bits;
}

inline std::vector<double> dequantize(const std::vector<std::uint8_t>& bits,
                                      const Quantizer& q) {
  if (bits.size() % q.bits != 0)
    throw std::invalid_argument("dequantize: bit count not a multiple");
  const std::uint32_t cells = 1u << q.bits;
  const double step = (q.hi - q.lo) / cells;
  std::vector<double> out;
  out.reserve(bits.size() / q.bits);
  for (std::size_t i = 0; i < bits.size(); i += q.bits) {
    std::uint32_t idx = 0;
    for (unsigned b = 0; b < q.bits; ++b)
      idx = (idx << 1) | (bits[i + b] & 1u);
    out.push_back(q.lo + (idx + 0.5) * step);
  }
  return out;
}

namespace detail {

inline double axis_amplitude(std::uint32_t gray_bits, const QamSpec& q) {
  const std::uint32_t level = gray_decode(gray_bits);
  return (2.0 * level - (q.levels - 1.0)) * q.scale;
}

inline std::uint32_t axis_gray_bits(double amplitude, const QamSpec& q) {
  const double raw = amplitude / q.scale;
  double level = std::round((raw + (q.levels - 1.0)) / 2.0);
  if (level < 0.0) level = 0.0;
  if (level > q.levels - 1.0) level = q.levels - 1.0;
  return gray_encode(static_cast<std::uint32_t>(level));
}

}  // namespace detail

inline ComplexBatch qam_modulate(const std::vector<std::uint8_t>& bits,
                                 const QamSpec& q) {
  const unsigned per_symbol = 2 * q.bits_per_axis;
  if (bits.size() % per_symbol != 0)
    throw std::invalid_argument("qam_modulate: bit count not a multiple");
  ComplexBatch out;
  out.reserve(bits.size() / per_symbol);
  for (std::size_t i = 0; i < bits.size(); i += per_symbol) {
    std::uint32_t gi = 0, gq = 0;
    for (unsigned b = 0; b < q.bits_per_axis; ++b)
      gi = (gi << 1) | (bits[i + b] & 1u);
    for (unsigned b = 0; b < q.bits_per_axis; ++b)
      gq = (gq << 1) | (bits[i + q.bits_per_axis + b] & 1u);
    out.emplace_back(detail::axis_amplitude(gi, q),
                     detail::axis_amplitude(gq, q));
  }
  return out;
}

// Minimum-distance decision per axis (nearest amplitude), Gray bits out.
inline std::vector<std::uint8_t> qam_demodulate(const ComplexBatch& symbols,
                                                const QamSpec& q) {
  std::vector<std::uint8_t> bits;
  bits.reserve(symbols.size() * 2 * q.bits_per_axis);
  for (const auto& s : symbols) {
    const std::uint32_t gi = detail::axis_gray_bits(s.real(), q);
    const std::uint32_t gq = detail::axis_gray_bits(s.imag(), q);
    for (unsigned b = q.bits_per_axis; b-- > 0;)
      bits.push_back(static_cast<std::uint8_t>((gi >> b) & 1u));
    for (unsigned b = q.bits_per_axis; b-- > 0;)
      bits.push_back(static_cast<std::uint8_t>((gq >> b) & 1u));
  }
  return bits;
}

// All M constellation points, indexed by concatenated (I, Q) Gray bits.
inline ComplexBatch constellation(const QamSpec& q) {
  std::vector<std::uint8_t> bits;
  const unsigned per_symbol = 2 * q.bits_per_axis;
  bits.reserve(static_cast<std::size_t>(q.order) * per_symbol);
  for (std::uint32_t v = 0; v < q.order; ++v)
    for (unsigned b = per_symbol; b-- > 0;)
      bits.push_back(static_cast<std::uint8_t>((v >> b) & 1u));
  return qam_modulate(bits, q);
}

}  // namespace diffrx
