#pragma once

// Counter-based random number generation (Philox4x32-10) and deterministic
// standard-normal variates via the inverse CDF. A variate is a pure function
// of (seed, stream, step, index), so ensembles of paths produce identical
// results regardless of thread count or evaluation order.

#include <array>
#include <cmath>
#include <cstdint>

namespace ldrank {

namespace detail {

inline void philox_round(uint32_t& x0, uint32_t& x1, uint32_t& x2, uint32_t& x3,
                         uint32_t k0, uint32_t k1) {
  const uint64_t p0 = 0xD2511F53ull * x0;
  const uint64_t p1 = 0xCD9E8D57ull * x2;
  const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
  const uint32_t lo0 = static_cast<uint32_t>(p0);
  const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
  const uint32_t lo1 = static_cast<uint32_t>(p1);
  x0 = hi1 ^ x1 ^ k0;
  x1 = lo1;
  x2 = hi0 ^ x3 ^ k1;
  x3 = lo0;
}

}  // namespace detail

/// One 128-bit Philox4x32-10 block keyed by a 64-bit key.
inline std::array<uint32_t, 4> philox4x32(uint64_t key, uint64_t ctr_hi, uint64_t ctr_lo) {
  uint32_t x0 = static_cast<uint32_t>(ctr_lo);
  uint32_t x1 = static_cast<uint32_t>(ctr_lo >> 32);
  uint32_t x2 = static_cast<uint32_t>(ctr_hi);
  uint32_t x3 = static_cast<uint32_t>(ctr_hi >> 32);
  uint32_t k0 = static_cast<uint32_t>(key);
  uint32_t k1 = static_cast<uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    detail::philox_round(x0, x1, x2, x3, k0, k1);
    k0 += 0x9E3779B9u;
    k1 += 0xBB67AE85u;
  }
  return {x0, x1, x2, x3};
}

/// Uniform double in the open interval (0, 1).
inline double u64_to_unit(uint64_t x) {
  return (static_cast<double>(x >> 11) + 0.5) * 0x1p-53;
}

/// Inverse of the standard normal CDF (Wichura's AS241, PPND16 precision).
inline double standard_normal_icdf(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

/// Deterministic stream of standard normals addressed by (step, index).
/// Two normals are derived from each Philox block; the block counter packs
/// (stream, step, block), so up to 2^17 normals are available per step.
class NormalStream {
 public:
  NormalStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

  void fill(uint64_t step, double* out, int n) const {
    const int blocks = (n + 1) / 2;
    int k = 0;
    for (int b = 0; b < blocks; ++b) {
      const auto r = philox4x32(seed_, stream_, (step << 17) | static_cast<uint64_t>(b));
      const uint64_t u0 = (static_cast<uint64_t>(r[0]) << 32) | r[1];
      const uint64_t u1 = (static_cast<uint64_t>(r[2]) << 32) | r[3];
      out[k++] = standard_normal_icdf(u64_to_unit(u0));
      if (k < n) out[k++] = standard_normal_icdf(u64_to_unit(u1));
    }
  }

  double at(uint64_t step, int index) const {
    const auto r = philox4x32(seed_, stream_, (step << 17) | static_cast<uint64_t>(index / 2));
    const uint64_t u = (index % 2 == 0)
                           ? (static_cast<uint64_t>(r[0]) << 32) | r[1]
                           : (static_cast<uint64_t>(r[2]) << 32) | r[3];
    return standard_normal_icdf(u64_to_unit(u));
  }

  /// ±1 entries (sign bit of the raw stream), used for Hutchinson probes.
  void fill_rademacher(uint64_t step, double* out, int n) const {
    const int blocks = (n + 3) / 4;
    int k = 0;
    for (int b = 0; b < blocks; ++b) {
      const auto r = philox4x32(seed_, stream_, (step << 17) | static_cast<uint64_t>(b));
      for (int j = 0; j < 4 && k < n; ++j)
        out[k++] = (r[j] & 0x80000000u) ? 1.0 : -1.0;
    }
  }

 private:
  uint64_t seed_;
  uint64_t stream_;
};

}  // namespace ldrank
