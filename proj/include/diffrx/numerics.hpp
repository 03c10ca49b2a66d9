#pragma once

// Seeded random streams and the small dense-tensor kernels shared by every
// other component.
//
// Randomness is counter-based (Philox-2x64, 10 rounds), so a stream is fully
// determined by a 64-bit key: identical seeds give bit-identical draw
// sequences on every platform. Child streams carry their own key derived from
// (parent key, lane), so each keyed stream is an independent permutation and
// sub-streams cannot run into one another no matter how many values are
// drawn. Gaussian variates use Box-Muller on the raw uniforms and Laplace
// variates use the inverse CDF; both transforms are fixed so that results do
// not depend on any library's distribution internals.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace diffrx {

namespace detail {

// SplitMix64 finalizer, used for seed conditioning and lane mixing.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(detail::mix64(seed)) {}

  // Independent child stream. Deterministic in (parent key, lane); children
  // with distinct lanes never share a key and never overlap.
  RngStream derive(std::uint64_t lane) const {
    RngStream child(0);
    auto block = philox(lane, 0x64726673ULL, key_);
    child.key_ = block.first;
    return child;
  }

  std::uint64_t next_u64() {
    if (buf_pos_ > 1) {
      auto block = philox(counter_++, 0, key_);
      buf_[0] = block.first;
      buf_[1] = block.second;
      buf_pos_ = 0;
    }
    return buf_[buf_pos_++];
  }

  // Uniform on the open interval (0, 1); never returns an exact endpoint, so
  // log/atanh style transforms are always safe.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal pair via Box-Muller; consumes exactly two uniforms.
  std::pair<double, double> next_normal_pair() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double next_normal() { return next_normal_pair().first; }

  // Unbiased uniform integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t v = next_u64();
      if (v >= threshold) return v % n;
    }
  }

 private:
  static std::pair<std::uint64_t, std::uint64_t> philox(std::uint64_t c0,
                                                        std::uint64_t c1,
                                                        std::uint64_t key) {
    constexpr std::uint64_t kMul = 0xd2b74407b1ce6e93ULL;
    constexpr std::uint64_t kWeyl = 0x9e3779b97f4a7c15ULL;
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 prod =
          static_cast<unsigned __int128>(kMul) * c0;
      const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
      const std::uint64_t lo = static_cast<std::uint64_t>(prod);
      c0 = hi ^ key ^ c1;
      c1 = lo;
      key += kWeyl;
    }
    return {c0, c1};
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::uint64_t buf_[2] = {0, 0};
  int buf_pos_ = 2;
};

// Dense row-major matrix of doubles. Plain value type; matrix products go
// through Eigen maps, everything else is simple loops.
struct Tensor2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) {
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::size_t size() const { return data.size(); }

  double* row_ptr(std::size_t r) { return data.data() + r * cols; }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }
};

namespace detail {

using EigenMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;
using EigenConstMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

inline EigenConstMap map(const Tensor2& t) {
  return EigenConstMap(t.data.data(), static_cast<Eigen::Index>(t.rows),
                       static_cast<Eigen::Index>(t.cols));
}
inline EigenMap map(Tensor2& t) {
  return EigenMap(t.data.data(), static_cast<Eigen::Index>(t.rows),
                  static_cast<Eigen::Index>(t.cols));
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  detail::require(a.cols == b.rows, "matmul: inner dimensions differ");
  Tensor2 out(a.rows, b.cols);
  detail::map(out).noalias() = detail::map(a) * detail::map(b);
  return out;
}

// A^T * B
inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
  detail::require(a.rows == b.rows, "matmul_tn: row counts differ");
  Tensor2 out(a.cols, b.cols);
  detail::map(out).noalias() = detail::map(a).transpose() * detail::map(b);
  return out;
}

// A * B^T
inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
  detail::require(a.cols == b.cols, "matmul_nt: column counts differ");
  Tensor2 out(a.rows, b.rows);
  detail::map(out).noalias() = detail::map(a) * detail::map(b).transpose();
  return out;
}

inline bool all_finite(const Tensor2& t) {
  for (double v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline Tensor2 sample_standard_normal(RngStream& rng, std::size_t rows,
                                      std::size_t cols) {
  detail::require(rows >= 1 && cols >= 1,
                  "sample_standard_normal: shape must be positive");
  Tensor2 out(rows, cols);
  std::size_t i = 0;
  const std::size_t n = out.size();
  for (; i + 1 < n; i += 2) {
    auto [z0, z1] = rng.next_normal_pair();
    out.data[i] = z0;
    out.data[i + 1] = z1;
  }
  if (i < n) out.data[i] = rng.next_normal_pair().first;
  return out;
}

namespace detail {

// Laplace(0, b) quantile of a (0, 1) uniform.
inline double laplace_inverse_cdf(double u, double b) {
  return (u < 0.5) ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
}

}  // namespace detail

// One Laplace draw with the given variance (scale b = sqrt(variance / 2)).
inline double next_laplace(RngStream& rng, double variance) {
  detail::require(variance >= 0.0, "next_laplace: variance must be non-negative");
  return detail::laplace_inverse_cdf(rng.next_unit(),
                                     std::sqrt(variance / 2.0));
}

// I.i.d. Laplace(0, b) entries with b = sqrt(variance / 2), so the entry
// variance equals target_variance exactly.
inline Tensor2 sample_laplace(RngStream& rng, double target_variance,
                              std::size_t rows, std::size_t cols) {
  detail::require(target_variance >= 0.0,
                  "sample_laplace: variance must be non-negative");
  detail::require(rows >= 1 && cols >= 1,
                  "sample_laplace: shape must be positive");
  const double b = std::sqrt(target_variance / 2.0);
  Tensor2 out(rows, cols);
  for (double& v : out.data)
    v = detail::laplace_inverse_cdf(rng.next_unit(), b);
  return out;
}

inline Tensor2 sample_uniform(RngStream& rng, double lo, double hi,
                              std::size_t rows, std::size_t cols) {
  detail::require(hi >= lo, "sample_uniform: empty range");
  Tensor2 out(rows, cols);
  for (double& v : out.data) v = lo + (hi - lo) * rng.next_unit();
  return out;
}

}  // namespace diffrx
