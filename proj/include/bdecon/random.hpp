#pragma once

#include <cstdint>
#include <random>

namespace bdecon {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Explicit random stream. All samplers take one of these; there is no global RNG.
/// Draws are produced with fully specified arithmetic so streams are
/// reproducible across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Stream number `index` split off `base_seed`; streams for different
  /// (base_seed, index) pairs are independent of each other and of draw order.
  static RandomStream split(std::uint64_t base_seed, std::uint64_t index) {
    return RandomStream(splitmix64(base_seed) ^ splitmix64(index * 0xd1342543de82ef95ULL + 1));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer on [0, bound) without modulo bias.
  std::uint64_t uniform_index(std::uint64_t bound);

  bool fair_coin() { return (engine_() >> 63) != 0; }

  double standard_normal();
  /// Standard Laplace via inverse CDF.
  double standard_laplace();
  /// Gamma(shape, rate) by Marsaglia-Tsang rejection; shapes below one use
  /// the U^(1/a) boosting identity.
  double gamma(double shape, double rate);

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace bdecon
