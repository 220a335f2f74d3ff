#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace pcflow {

// Deterministic counter-free random stream (splitmix64 core). All randomness
// in the pipeline flows through named forks of one master stream, so every
// stage is reproducible in isolation. No libc++/libstdc++ distribution
// objects are used anywhere: their output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53 mantissa bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased-enough integer in [0, n) via 128-bit multiply.
  std::uint32_t below(std::uint32_t n) {
    return std::uint32_t((__uint128_t(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. Uses two uniforms per draw; no cached
  // second value, so forked streams stay position-independent.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    // Guard the log singularity at u1 == 0.
    u1 = 1.0 - u1;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Child stream identified by a name; independent of draws made on *this*
  // after construction of the fork.
  Rng fork(std::string_view name) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
      h ^= std::uint64_t(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;
    }
    return Rng(mix(state_, h));
  }

  Rng fork(std::uint64_t index) const { return Rng(mix(state_, 0x9e3779b97f4a7c15ULL ^ index)); }

 private:
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace pcflow
