// Copyright (c) 2026 the voxelpipe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace voxelpipe {

// Deterministic random stream. mt19937_64 has a standard-mandated sequence;
// the uniform/normal transforms are hand-rolled because the std::*
// distributions are implementation-defined and would break run-to-run
// reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; draws two uniforms per call and discards the second branch
  // so the stream position is call-count deterministic.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // index in [0, n)
  uint64_t below(uint64_t n) {
    return n == 0 ? 0 : gen_() % n;
  }

 private:
  std::mt19937_64 gen_;
};

// splitmix64 finalizer, used to fold tags (case index, epoch, ...) into a
// base seed so per-sample streams are independent of iteration order.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL + b;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename... Tags>
uint64_t derive_seed(uint64_t base, Tags... tags) {
  uint64_t s = base;
  ((s = mix_seed(s, static_cast<uint64_t>(tags))), ...);
  return s;
}

// Fisher-Yates with the deterministic stream above.
template <typename Vec>
void shuffle_indices(Vec& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace voxelpipe
