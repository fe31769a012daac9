#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hkrm {

// splitmix64 finalizer; used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over the bytes of `s`.
std::uint64_t fnv1a(std::string_view s);

// Per-component seed: mix64(root ^ fnv1a(component)). Streams of distinct
// components never depend on each other, so adding a component leaves the
// others untouched.
std::uint64_t derive_seed(std::uint64_t root, std::string_view component);
std::uint64_t derive_seed(std::uint64_t root, std::string_view component, std::uint64_t index);

// Deterministic generator. The distributions are implemented here rather than
// taken from <random> because the standard distributions are not required to
// produce identical sequences across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal (Box-Muller, caches the second variate).
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hkrm
