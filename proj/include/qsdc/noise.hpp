#pragma once

// Counter-based complex Wiener increments. Every increment is a pure function
// of (seed, trajectory, channel, step), so paths can be regenerated for
// replay and trajectories can be dispatched to any thread in any order.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "qsdc/errors.hpp"

namespace qsdc {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      ctr = round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static Counter round(const Counter& c, const Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Complex increments dxi = (x + i y) sqrt(dt/2), x, y standard normal, so
// M(dxi) = M(dxi^2) = 0 and M(|dxi|^2) = dt.
class NoisePath {
 public:
  NoisePath() = default;

  NoisePath(std::uint64_t seed, std::uint64_t trajectory, int n_channels, double dt, std::size_t n_steps)
      : seed_(seed), trajectory_(trajectory), n_channels_(n_channels), dt_(dt), n_steps_(n_steps) {
    if (n_channels < 0) throw InvalidArgument("noise path needs n_channels >= 0");
    if (!(dt > 0.0)) throw InvalidArgument("noise path needs dt > 0");
    const std::uint64_t k = splitmix64(splitmix64(seed) + trajectory);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    scale_ = std::sqrt(dt / 2.0);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t trajectory() const noexcept { return trajectory_; }
  int n_channels() const noexcept { return n_channels_; }
  double dt() const noexcept { return dt_; }
  std::size_t n_steps() const noexcept { return n_steps_; }

  std::complex<double> increment(std::size_t step, int channel) const noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                                  static_cast<std::uint32_t>(channel), 0x51D5EEDu};
    const auto r = Philox4x32::generate(ctr, key_);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    constexpr double k53 = 1.0 / 9007199254740992.0;
    const double u1 = static_cast<double>(a >> 11) * k53;  // [0, 1)
    const double u2 = static_cast<double>(b >> 11) * k53;
    const double rad = std::sqrt(-2.0 * std::log1p(-u1));
    const double th = 2.0 * std::numbers::pi * u2;
    return {scale_ * rad * std::cos(th), scale_ * rad * std::sin(th)};
  }

  // Fills out[m] with the increment of every channel at `step`.
  void increments_at(std::size_t step, std::complex<double>* out) const noexcept {
    for (int m = 0; m < n_channels_; ++m) out[m] = increment(step, m);
  }

  std::vector<std::complex<double>> channel(int m) const {
    if (m < 0 || m >= n_channels_) throw InvalidArgument("noise channel out of range");
    std::vector<std::complex<double>> out(n_steps_);
    for (std::size_t k = 0; k < n_steps_; ++k) out[k] = increment(k, m);
    return out;
  }

  bool operator==(const NoisePath& o) const noexcept {
    return seed_ == o.seed_ && trajectory_ == o.trajectory_ && n_channels_ == o.n_channels_ && dt_ == o.dt_ &&
           n_steps_ == o.n_steps_;
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t trajectory_ = 0;
  int n_channels_ = 0;
  double dt_ = 0.0;
  std::size_t n_steps_ = 0;
  Philox4x32::Key key_{};
  double scale_ = 0.0;
};

inline NoisePath sample_noise(int n_channels, double dt, std::size_t n_steps, std::uint64_t seed,
                              std::uint64_t trajectory = 0) {
  if (n_steps < 1) throw InvalidArgument("sample_noise needs n_steps >= 1");
  return NoisePath(seed, trajectory, n_channels, dt, n_steps);
}

}  // namespace qsdc
