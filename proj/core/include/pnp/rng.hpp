#pragma once

#include <cstdint>
#include <random>

#include "pnp/tensor.hpp"

namespace pnp {

struct RngSeed {
  std::uint64_t value = 0;
};

// Independent seed for sub-stream `stream` of `base` (splitmix64 mix).
RngSeed derive_seed(RngSeed base, std::uint64_t stream);

// Deterministic random source. Same seed and same call sequence give the
// same stream on a given standard library.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  std::uint64_t poisson(double mean);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

Tensor random_normal(Shape shape, Rng& rng, double stddev = 1.0);
Tensor random_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0);

}  // namespace pnp
