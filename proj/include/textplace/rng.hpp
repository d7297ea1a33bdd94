#pragma once

#include <cstdint>
#include <random>

namespace textplace {

// Thin wrapper over mt19937_64 that derives uniforms directly from the raw
// stream, so sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
  }

  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace textplace
