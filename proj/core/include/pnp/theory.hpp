#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pnp/denoiser.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/trace.hpp"

namespace pnp {

// Open interval (lo, hi); hi may be +infinity.
struct AlphaInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double a) const { return a > lo && a < hi; }
};

struct TheoryBounds {
  double delta = 0.0;                       // Lipschitz bound of the iteration map
  std::optional<AlphaInterval> alpha_range; // step sizes with delta < 1
  bool feasible = false;                    // some step size gives a contraction

  bool contractive() const { return delta < 1.0; }
};

// Forward-backward: delta = max(|1 - a mu|, |1 - a L|)(1 + eps).
TheoryBounds theory_fbs(double mu, double L, double eps, double alpha);

// Douglas-Rachford / ADMM: delta = (1 + eps + eps a mu + 2 eps^2 a mu) / (1 + a mu + 2 eps a mu).
TheoryBounds theory_drs(double mu, double eps, double alpha);

// Bounds for a concrete run, or nothing when mu/L/eps are unknown or mu = 0.
std::optional<TheoryBounds> theory_for(Method method, const FidelityModel& f, std::optional<double> eps,
                                       double alpha);

struct ContractionStats {
  std::vector<double> ratios;
  double geometric_mean = 0.0;
  std::size_t excluded = 0;  // steps whose previous residual was below 1e-14
  bool degenerate = false;   // no usable ratio (e.g. started at the fixed point)
};

inline constexpr double kVanishingResidual = 1e-14;

// Per-step Cauchy ratios ||w^{k+1} - w^k|| / ||w^k - w^{k-1}|| and their geometric mean.
ContractionStats contraction_stats(const IterTrace& trace);

using Operator = std::function<Tensor(const Tensor&)>;

// max over pairs of ||Tx - Ty||^2 + (1 - 2 theta)||x - y||^2 - 2(1 - theta)<Tx - Ty, x - y>.
// A nonpositive value (up to rounding) is consistent with T being theta-averaged.
double averagedness_margin(const Operator& op, double theta, std::span<const TensorPair> pairs);

}  // namespace pnp
