#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace stochesp {

// Philox4x32-10 counter-based generator (Salmon et al., Random123 family).
// Stateless: every 128-bit counter maps to an independent 128-bit block
// under a 64-bit key, which gives per-(path, time, component) substreams
// that are identical for any thread count or evaluation order.

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& c, std::uint32_t k0,
                         std::uint32_t k1) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
}

}  // namespace detail

inline std::array<std::uint32_t, 4> philox4x32(
    std::array<std::uint32_t, 4> counter, std::uint64_t key) {
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k0 += detail::kPhiloxW0;
      k1 += detail::kPhiloxW1;
    }
    detail::philox_round(counter, k0, k1);
  }
  return counter;
}

/// Two uniforms in (0,1) for the substream (seed; path, time index, component).
inline std::array<double, 2> counter_uniforms(std::uint64_t seed,
                                              std::uint64_t path,
                                              std::uint32_t time_index,
                                              std::uint32_t component) {
  const auto block = philox4x32(
      {static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
       time_index, component},
      seed);
  const std::uint64_t a =
      (static_cast<std::uint64_t>(block[0]) << 32) | block[1];
  const std::uint64_t b =
      (static_cast<std::uint64_t>(block[2]) << 32) | block[3];
  constexpr double scale = 0x1.0p-53;
  return {(static_cast<double>(a >> 11) + 0.5) * scale,
          (static_cast<double>(b >> 11) + 0.5) * scale};
}

/// Standard normal draw (Box-Muller on the substream's two uniforms).
inline double counter_normal(std::uint64_t seed, std::uint64_t path,
                             std::uint32_t time_index,
                             std::uint32_t component) {
  const auto u = counter_uniforms(seed, path, time_index, component);
  return std::sqrt(-2.0 * std::log(u[0])) *
         std::cos(2.0 * std::numbers::pi * u[1]);
}

/// Student-t draw with nu degrees of freedom (Bailey's polar method).
inline double counter_student_t(std::uint64_t seed, std::uint64_t path,
                                std::uint32_t time_index,
                                std::uint32_t component, double nu) {
  const auto u = counter_uniforms(seed, path, time_index, component);
  return std::sqrt(nu * (std::pow(u[0], -2.0 / nu) - 1.0)) *
         std::cos(2.0 * std::numbers::pi * u[1]);
}

}  // namespace stochesp
