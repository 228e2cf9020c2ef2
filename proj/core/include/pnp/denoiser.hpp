#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pnp/cnn.hpp"
#include "pnp/rng.hpp"
#include "pnp/tensor.hpp"
#include "pnp/trace.hpp"

namespace pnp {

// Denoiser H. eps_bound, when present, certifies that H - I is
// eps-Lipschitz; it is metadata and never enforced by apply().
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::string name() const = 0;
  // Shape-preserving.
  virtual Tensor apply(const Tensor& x) const = 0;
  virtual double sigma() const { return 0.0; }
  virtual std::optional<double> eps_bound() const = 0;
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

DenoiserPtr identity_denoiser();

// H(x) = x + eps * Q(x), Q the reversal of the flattened tensor. Q is an
// isometry, so every residual ratio equals eps.
DenoiserPtr orthogonal_residual_denoiser(double eps);

// H = (1 - lambda) I + lambda B, B the zero-padded 3x3 box filter applied per
// channel. eps_bound = lambda * sigma_max(B - I) on `shape`'s grid, from the
// dense oracle.
DenoiserPtr blur_blend_denoiser(double lambda, Shape shape);

// H(y) = y - R(y). eps_bound is the product of the layer targets for
// realSN-trained models and absent otherwise.
DenoiserPtr cnn_denoiser(SimpleCNNModel model, double sigma = 0.0);

// Applies `inner` to each channel separately (e.g. a 1-channel CNN on the
// real and imaginary parts of a complex image). Keeps inner's eps_bound.
DenoiserPtr channelwise_denoiser(DenoiserPtr inner);

// max(H(x), 0). No certified bound survives the clamp.
DenoiserPtr nonnegative_denoiser(DenoiserPtr inner);

enum class PairScheme { iterates_vs_limit, random_pairs };

const char* to_string(PairScheme s);

using TensorPair = std::pair<Tensor, Tensor>;

struct EpsEstimate {
  std::vector<double> ratios;
  double max_ratio = 0.0;
  PairScheme pair_scheme = PairScheme::random_pairs;
  std::size_t degenerate_pairs = 0;  // pairs with x == y, skipped
};

// ||(H-I)x - (H-I)y|| / ||x - y|| per pair. max_ratio lower-bounds the true eps.
EpsEstimate estimate_eps(const Denoiser& d, std::span<const TensorPair> pairs, PairScheme scheme);

// (x^k, x^final) for every stored iterate distinct from the limit. Throws
// DomainError unless the trace converged.
std::vector<TensorPair> iterate_pairs_from_trace(const IterTrace& trace);

// `n` pairs (x, y) with x ~ U[lo,hi]^shape and y = x + N(0, spread^2).
std::vector<TensorPair> random_pairs(Shape shape, std::size_t n, Rng& rng, double lo = 0.0, double hi = 1.0,
                                     double spread = 0.1);

}  // namespace pnp
