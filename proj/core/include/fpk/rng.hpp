#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace fpk {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Every draw is a pure function of (key, counter), so streams can be indexed
/// by (path, step, coordinate) without any sequential state. This is what
/// makes ensembles bit-identical regardless of thread count and gives common
/// random numbers across truncation levels.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// SplitMix64 finalizer; used to derive per-purpose keys from a user seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Stream tags keep independent consumers of one seed decorrelated.
enum class Stream : std::uint64_t {
  kPaths = 1,
  kSamplePlan = 2,
  kFamily = 3,
  kTest = 4,
};

/// Indexed normal / uniform draws keyed by (seed, stream).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, Stream stream) noexcept {
    const std::uint64_t k = mix64(seed ^ mix64(static_cast<std::uint64_t>(stream)));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  /// Two uniforms in (0, 1] for counter (a, b, c).
  std::pair<double, double> uniform_pair(std::uint64_t a, std::uint32_t b,
                                         std::uint32_t c = 0) const noexcept {
    const auto out = Philox4x32::generate(
        {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b, c}, key_);
    return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
  }

  /// Two independent standard normals (Box-Muller) for counter (a, b, c).
  std::pair<double, double> normal_pair(std::uint64_t a, std::uint32_t b,
                                        std::uint32_t c = 0) const noexcept {
    const auto [u1, u2] = uniform_pair(a, b, c);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// Fill `out[0..count)` with normals for (path, step); coordinate j of a
  /// given (path, step) is the same regardless of `count`.
  void normals(std::uint64_t path, std::uint32_t step, double* out,
               std::size_t count) const noexcept {
    for (std::size_t j = 0; j < count; j += 2) {
      const auto [z0, z1] = normal_pair(path, step, static_cast<std::uint32_t>(j / 2));
      out[j] = z0;
      if (j + 1 < count) out[j + 1] = z1;
    }
  }

 private:
  static double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  Philox4x32::Key key_{};
};

}  // namespace fpk
