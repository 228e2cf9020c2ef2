#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnp/image_io.hpp"
#include "pnp/rng.hpp"
#include "pnp/tensor.hpp"

namespace pnp {

// Data-fidelity term f with its gradient, proximal map and (when known)
// convexity constants. Implementations are immutable and thread-safe.
class FidelityModel {
 public:
  virtual ~FidelityModel() = default;

  virtual std::string name() const = 0;
  // Shape of the images f is defined on.
  virtual Shape shape() const = 0;

  // f(x); +infinity outside the effective domain.
  virtual double eval(const Tensor& x) const = 0;
  virtual Tensor grad(const Tensor& x) const = 0;
  // argmin_x alpha*f(x) + 0.5*||x - z||^2.
  virtual Tensor prox(double alpha, const Tensor& z) const = 0;

  // Strong-convexity modulus. Empty means unknown, not zero.
  virtual std::optional<double> mu() const = 0;
  // Lipschitz constant of the gradient. Empty means unknown.
  virtual std::optional<double> lip_grad() const = 0;
};

using FidelityPtr = std::shared_ptr<const FidelityModel>;

// f(x) = 0.5*||x - b||^2, mu = L = 1.
FidelityPtr quadratic_model(Tensor b);

// Poisson negative log-likelihood for integer counts y.
FidelityPtr poisson_model(Tensor counts);

// Binary single-photon observation summarised per unit pixel.
struct QisObservation {
  Shape shape;
  std::vector<std::uint32_t> ones;  // K1_j, number of ones among the K sub-pixels.
  double sensor_gain = 8.0;         // alpha_sg
  std::uint32_t oversample = 8;     // K

  std::uint32_t zeros(std::size_t j) const { return oversample - ones[j]; }
  // Throws DomainError/ShapeError when K1_j > K or sizes disagree.
  void validate() const;
};

// QIS likelihood f(x) = sum_j K0_j*beta*x_j - K1_j*log(1 - exp(-beta*x_j)), beta = gain/K.
FidelityPtr qis_model(QisObservation obs);

// Draws K binary sub-pixels per pixel with P(one) = 1 - exp(-gain*x/K).
QisObservation simulate_qis(const Tensor& x_true, double sensor_gain, std::uint32_t oversample, Rng& rng);

struct MriProblem {
  Mask mask;          // sampled k-space cells
  ComplexImage y;     // measured k-space, zero off-mask
  double noise_sigma = 0.0;

  void validate() const;
};

// f(x) = 0.5*||y - M F x||^2 over complex images stored as 2-channel tensors
// (channel 0 real, channel 1 imaginary). F is the unitary DFT, so L = 1;
// mu = 1 only for a full mask.
FidelityPtr mri_model(MriProblem problem);

// y = M (F x_true + noise), noise i.i.d. N(0, sigma^2) on each real and imaginary part.
MriProblem simulate_mri(const Tensor& x_true, Mask mask, double noise_sigma, Rng& rng);

// F^* M^* y as a 2-channel tensor.
Tensor zero_filled(const MriProblem& problem);

// round(rate*h*w) cells sampled uniformly without replacement; DC (0,0) is
// always one of them.
Mask random_mask(std::size_t height, std::size_t width, double rate, RngSeed seed);

// Scalar building blocks, exposed for the per-pixel oracles.
namespace scalar {

// Minimiser of alpha*(x - y*log x) + 0.5*(x - z)^2 over x >= 0.
double poisson_prox(double alpha, double z, double y);

// Minimiser of alpha*(k0*beta*x - k1*log(1 - exp(-beta*x))) + 0.5*(x - z)^2
// by safeguarded Newton on the optimality condition.
double qis_prox(double alpha, double z, double k0, double k1, double beta);

double qis_value(double x, double k0, double k1, double beta);
double qis_derivative(double x, double k0, double k1, double beta);

}  // namespace scalar

}  // namespace pnp
