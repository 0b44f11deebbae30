#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace abx {

// Float inputs, 64-bit accumulation in a fixed order (four interleaved lanes,
// combined left to right), so a given pair of rows always yields the same bits.
inline double dot_f64(std::span<const float> u, std::span<const float> v) noexcept {
  const std::size_t n = u.size();
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += static_cast<double>(u[i]) * v[i];
    s1 += static_cast<double>(u[i + 1]) * v[i + 1];
    s2 += static_cast<double>(u[i + 2]) * v[i + 2];
    s3 += static_cast<double>(u[i + 3]) * v[i + 3];
  }
  for (; i < n; ++i) s0 += static_cast<double>(u[i]) * v[i];
  return (s0 + s1) + (s2 + s3);
}

inline double norm_f64(std::span<const float> u) noexcept { return std::sqrt(dot_f64(u, u)); }

// 1 - cos(u, v) from precomputed norms, clamped to [0, 2].
inline double cosine_distance_normed(std::span<const float> u, double norm_u, std::span<const float> v,
                                     double norm_v) noexcept {
  const double d = 1.0 - dot_f64(u, v) / (norm_u * norm_v);
  return d < 0.0 ? 0.0 : (d > 2.0 ? 2.0 : d);
}

// Throws invariant_error on a zero-norm vector or a dim mismatch.
double cosine_distance(std::span<const float> u, std::span<const float> v);

// 1 if d(x,a) < d(x,b), 0 if greater, 0.5 on exact equality.
double score_triplet(std::span<const float> x, std::span<const float> a, std::span<const float> b);

// Same decision in half-point units {0, 1, 2}.
inline unsigned half_points(double d_xa, double d_xb) noexcept {
  return d_xa < d_xb ? 2U : (d_xa > d_xb ? 0U : 1U);
}

}  // namespace abx
