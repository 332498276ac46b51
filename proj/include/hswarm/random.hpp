#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hswarm {

/// Seeded pseudo-random stream. Every consumer derives its own sub-stream from
/// a (seed, purpose, index...) key, so results do not depend on evaluation
/// order or thread count.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1) with 53 random bits; portable across standard libraries.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  bool bernoulli(double prob) { return uniform() < prob; }

  SeededStream derive(std::initializer_list<std::uint64_t> keys) const {
    std::uint64_t h = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
    for (auto k : keys) h = mix(h ^ (k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
    return SeededStream(h);
  }

  std::uint64_t next_raw() { return engine_(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Stream purposes used as the first derivation key.
enum class StreamTag : std::uint64_t {
  init_matrices = 1,
  role_decode = 2,
  role_pso = 3,
  weight_assign = 4,
  weight_pso = 5,
  dropout = 6,
  pool_init = 7,
  task_data = 8,
  sweep = 9,
};

inline std::uint64_t key(StreamTag tag) { return static_cast<std::uint64_t>(tag); }

}  // namespace hswarm
