#pragma once

#include <cmath>
#include <vector>

#include "pnp/rng.hpp"
#include "pnp/tensor.hpp"

namespace testing {

inline pnp::Tensor randn(pnp::Shape s, pnp::Rng& rng, double sd = 1.0) { return pnp::random_normal(s, rng, sd); }

inline double max_abs_diff(const pnp::Tensor& a, const pnp::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rel_err(const pnp::Tensor& a, const pnp::Tensor& b) {
  return pnp::distance(a, b) / std::max(1e-300, std::max(pnp::norm2(a), pnp::norm2(b)));
}

}  // namespace testing
