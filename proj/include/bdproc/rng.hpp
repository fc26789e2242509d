#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace bdproc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; only used to turn substream names into tags.
constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

// Seed of replicate i; independent of the ensemble size so ensembles extend
// without reshuffling earlier replicates.
inline std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t index) {
  return derive_seed(base_seed, index);
}

// A single named random stream. Variates are produced with explicit
// transforms so sequences are identical across standard libraries.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream) : engine_(derive_seed(seed, fnv1a(stream))) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double rate = 1.0) { return -std::log(uniform_pos()) / rate; }

  // Exact Poisson variate by counting unit-rate arrivals; O(mean) work.
  std::uint64_t poisson(double mean) {
    std::uint64_t k = 0;
    double t = exponential();
    while (t <= mean) {
      ++k;
      t += exponential();
    }
    return k;
  }

  // Uniform on {0, ..., n-1}, rejection-corrected.
  std::size_t index(std::size_t n) {
    const std::uint64_t m = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % m;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return static_cast<std::size_t>(v % m);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bdproc
