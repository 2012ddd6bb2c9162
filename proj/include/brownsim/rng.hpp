#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace brownsim {

/// splitmix64 step; used to derive well-separated seeds for substreams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// Stream tags so the trace generator, component generator and UBP
// selection never share a random sequence even under the same run seed.
namespace stream {
inline constexpr std::uint64_t traces = 0x7452'6143'6553'7431ULL;
inline constexpr std::uint64_t components = 0x436f'6d70'6f6e'3141ULL;
inline constexpr std::uint64_t ubp = 0x5562'7053'656c'3163ULL;
}  // namespace stream

/// Deterministic RNG wrapper. mt19937_64 output is fully specified by the
/// standard; the distributions below are hand-rolled because the standard
/// library distribution objects are implementation-defined and would break
/// bit-reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double canonical() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return canonical() < p; }

  /// Box-Muller transform, cosine branch only.
  double normal(double mean, double stddev) {
    double u1 = canonical();
    double u2 = canonical();
    // avoid log(0)
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace brownsim
