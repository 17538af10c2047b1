#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace noisere {

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic RNG. Distribution helpers are hand-rolled on top of
// mt19937_64 so that draws are reproducible bit-for-bit: the standard
// pins the engine but not the distribution adaptors.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Independent stream derived from a root seed and a label. Used so that
  // adding or removing one consumer (e.g. an extra parameter) does not
  // shift the draws seen by every other consumer.
  static Rng derive(uint64_t root_seed, std::string_view label) {
    return Rng(fnv1a64(label) ^ (0x9E3779B97F4A7C15ULL * (root_seed + 0x243F6A8885A308D3ULL)));
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at our scales
  // and keeps the draw count per call fixed.
  size_t bounded(size_t n) { return n == 0 ? 0 : static_cast<size_t>(engine_() % n); }

  // Sample an index from an unnormalized weight vector.
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double r = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (r < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = bounded(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace noisere
