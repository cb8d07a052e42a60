#pragma once

#include <cmath>
#include <cstdint>

namespace cascade {

// Counter-based generator built on the splitmix64 finalizer. Each (seed,
// stream) pair yields an independent sequence, so Monte Carlo paths can be
// generated in any order, or in parallel, and still be bit-identical to the
// sequential run. State is a single counter; there is no warm-up.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream)
      : base_(mix(seed ^ mix(stream ^ 0x6a09e667f3bcc909ull))) {}

  explicit Rng(uint64_t seed) : Rng(seed, 0) {}

  uint64_t next_u64() { return mix(base_ + (++counter_) * 0x9e3779b97f4a7c15ull); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Exponential with the given rate. log1p keeps small draws accurate and
  // excludes the u == 1 endpoint, so the result is finite and positive or zero
  // only when the 53-bit uniform is exactly zero.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  uint64_t base_;
  uint64_t counter_ = 0;
};

}  // namespace cascade
