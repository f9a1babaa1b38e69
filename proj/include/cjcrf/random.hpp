#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

namespace cjcrf {

/// Stream domains. Every random draw in the library comes from
/// Rng::stream(seed, domain, index), so results never depend on call order
/// across samples or threads.
enum class StreamDomain : std::uint64_t {
  SynthDeformation = 1,
  SynthLabels = 2,
  SynthSample = 3,
  CdInit = 4,
  CdEpoch = 5,
  Augment = 6,
  Test = 99,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based SplitMix64 generator. The state of stream (seed, domain,
/// index) is mix64(mix64(seed ^ mix64(domain)) ^ index); draws advance the
/// state by the golden-ratio increment. Uniforms use the top 53 bits and
/// normals use one Box-Muller branch per draw.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  static Rng stream(std::uint64_t seed, StreamDomain domain, std::uint64_t index = 0) {
    const auto d = static_cast<std::uint64_t>(domain);
    return Rng(mix64(mix64(seed ^ mix64(d)) ^ index));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % (n == 0 ? 1 : n);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace cjcrf
