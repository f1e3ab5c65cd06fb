#pragma once

// Reproducible random number streams.  Every concurrent unit of work in the
// library (chain x subject, replicate, likelihood evaluation) owns one
// RngStream identified by (seed, stream_id); draws depend only on that pair
// and on the sequence of calls, never on scheduling.  The generator is
// xoshiro256++ with SplitMix64 state expansion, which gives independent
// sequences for distinct stream ids under a shared seed.

#include <cstdint>
#include <stdexcept>

#include "zibbmr/types.hpp"

namespace zibbmr {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (b * 0x632be59bd9b4e019ULL + 0x9e3779b97f4a7c15ULL);
  return splitmix64(state);
}

}  // namespace detail

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    std::uint64_t state = detail::mix64(seed, stream_id);
    bool all_zero = true;
    for (auto& word : s_) {
      word = detail::splitmix64(state);
      all_zero = all_zero && word == 0;
    }
    if (all_zero) s_[0] = 0x9e3779b97f4a7c15ULL;
  }

  // Deterministic child stream; (seed, id) pairs of children of distinct
  // parents never collide in practice because the parent pair is hashed.
  RngStream child(std::uint64_t sub_id) const {
    return RngStream(detail::mix64(seed_, stream_id_), sub_id);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1); safe under log().
  double open01() { return ((next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4];
};

// Standard normal deviate, Marsaglia polar method.  The spare deviate is not
// cached so that each call consumes a self-contained block of the stream.
inline double sample_normal(RngStream& rng) {
  for (;;) {
    const double u = 2.0 * rng.open01() - 1.0;
    const double v = 2.0 * rng.open01() - 1.0;
    const double r2 = u * u + v * v;
    if (r2 < 1.0 && r2 > 0.0)
      return u * std::sqrt(-2.0 * std::log(r2) / r2);
  }
}

// Gamma(shape, 1), Marsaglia-Tsang squeeze; shape < 1 handled by the
// boost Gamma(a) = Gamma(a+1) * U^{1/a}.
inline double sample_gamma(RngStream& rng, double shape) {
  if (!(shape > 0.0)) throw std::domain_error("sample_gamma: shape must be > 0");
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0);
    return g * std::pow(rng.open01(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.open01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Beta(p, q) as G_p / (G_p + G_q).  For very small shapes both gammas can
// underflow to zero; retry, then fall back to the mean.  The result is kept
// strictly inside (0, 1) so downstream logs are finite.
inline double sample_beta(RngStream& rng, double p, double q) {
  if (!(p > 0.0 && q > 0.0))
    throw std::domain_error("sample_beta: shapes must be > 0");
  double w = p / (p + q);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const double g1 = sample_gamma(rng, p);
    const double g2 = sample_gamma(rng, q);
    if (g1 + g2 > 0.0) {
      w = g1 / (g1 + g2);
      break;
    }
  }
  const double lo = 1e-300;
  const double hi = 1.0 - 1e-16;
  return w < lo ? lo : (w > hi ? hi : w);
}

// Student t with df > 0 degrees of freedom: Z / sqrt(ChiSq_df / df).
inline double sample_student_t(RngStream& rng, double df) {
  if (!(df > 0.0)) throw std::domain_error("sample_student_t: df must be > 0");
  const double z = sample_normal(rng);
  const double chisq = 2.0 * sample_gamma(rng, 0.5 * df);
  return z / std::sqrt(chisq / df);
}

// Uniform integer on [lo, hi], inclusive, bias-free by rejection.
inline std::int64_t sample_uniform_int(RngStream& rng, std::int64_t lo,
                                       std::int64_t hi) {
  if (lo > hi) throw std::domain_error("sample_uniform_int: lo > hi");
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(rng.next_u64());  // full span
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
  for (;;) {
    const std::uint64_t x = rng.next_u64();
    if (x < limit) return lo + static_cast<std::int64_t>(x % range);
  }
}

// Bivariate normal with symmetric positive semi-definite covariance.  The
// 2x2 Cholesky factor is formed directly so that exactly singular covariances
// (e.g. the zero matrix) degenerate cleanly instead of failing.
inline Vector2 sample_normal(RngStream& rng, const Vector2& mean,
                             const Matrix2& cov) {
  const double scale = std::fabs(cov(0, 0)) + std::fabs(cov(1, 1)) + 1e-300;
  if (std::fabs(cov(0, 1) - cov(1, 0)) > 1e-12 * scale)
    throw std::domain_error("sample_normal: covariance not symmetric");
  if (cov(0, 0) < 0.0 || cov(1, 1) < 0.0)
    throw std::domain_error("sample_normal: covariance not PSD");
  const double l11 = std::sqrt(cov(0, 0));
  double l21 = 0.0;
  if (l11 > 0.0) {
    l21 = cov(1, 0) / l11;
  } else if (std::fabs(cov(1, 0)) > 1e-12 * scale) {
    throw std::domain_error("sample_normal: covariance not PSD");
  }
  const double rem = cov(1, 1) - l21 * l21;
  if (rem < -1e-10 * scale)
    throw std::domain_error("sample_normal: covariance not PSD");
  const double l22 = std::sqrt(rem > 0.0 ? rem : 0.0);
  const double z1 = sample_normal(rng);
  const double z2 = sample_normal(rng);
  return Vector2(mean(0) + l11 * z1, mean(1) + l21 * z1 + l22 * z2);
}

// Scalar overload for symmetry with the bivariate form.
inline double sample_normal(RngStream& rng, double mean, double sd) {
  return mean + sd * sample_normal(rng);
}

}  // namespace zibbmr
