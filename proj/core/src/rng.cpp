#include "pnp/rng.hpp"

#include <limits>

namespace pnp {

RngSeed derive_seed(RngSeed base, std::uint64_t stream) {
  std::uint64_t z = base.value + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return RngSeed{z ^ (z >> 31)};
}

double Rng::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() { return normal_(engine_); }

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

std::uint64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(engine_);
}

Tensor random_normal(Shape shape, Rng& rng, double stddev) {
  Tensor t(shape);
  for (double& v : t.values()) v = stddev * rng.normal();
  return t;
}

Tensor random_uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace pnp
