#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "pnp/rng.hpp"
#include "pnp/tensor.hpp"

namespace pnp {

// 4-D convolution kernel of shape (c_out, c_in, kh, kw), row-major.
// Odd spatial extents only; zero padding of (k-1)/2 keeps h x w unchanged.
class ConvKernel {
 public:
  ConvKernel() = default;
  ConvKernel(std::size_t c_out, std::size_t c_in, std::size_t kh = 3, std::size_t kw = 3);
  ConvKernel(std::size_t c_out, std::size_t c_in, std::size_t kh, std::size_t kw, std::vector<double> weights);

  std::size_t c_out() const { return c_out_; }
  std::size_t c_in() const { return c_in_; }
  std::size_t kh() const { return kh_; }
  std::size_t kw() const { return kw_; }
  std::size_t size() const { return weights_.size(); }

  double& operator()(std::size_t o, std::size_t i, std::size_t y, std::size_t x) {
    return weights_[((o * c_in_ + i) * kh_ + y) * kw_ + x];
  }
  double operator()(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
    return weights_[((o * c_in_ + i) * kh_ + y) * kw_ + x];
  }

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  ConvKernel scaled(double s) const;

  friend bool operator==(const ConvKernel&, const ConvKernel&) = default;

 private:
  std::size_t c_out_ = 0, c_in_ = 0, kh_ = 0, kw_ = 0;
  std::vector<double> weights_;
};

// Kernel of the adjoint operator: first two axes swapped, spatial axes
// rotated by 180 degrees.
ConvKernel adjoint_kernel(const ConvKernel& k);

// Stride-1 zero-padded cross-correlation; output has c_out channels.
Tensor conv_forward(const ConvKernel& k, const Tensor& x);
// Adjoint of conv_forward on the same spatial grid.
Tensor conv_adjoint(const ConvKernel& k, const Tensor& u);

// Left/right singular-vector estimates for the operator on an h x w grid.
struct PowerIterState {
  Tensor u;  // (c_out, h, w), unit norm
  Tensor v;  // (c_in, h, w), unit norm
  RngSeed reseed{};               // source for re-initialisation noise
  std::uint64_t reinitializations = 0;
  bool reinitialized_last_step = false;
};

// Seeded standard-normal start, normalised.
PowerIterState init_power_state(const ConvKernel& k, std::size_t height, std::size_t width, RngSeed seed);

// v <- K*(u)/||K*(u)||, u <- K(v)/||K(v)||. A vanishing image restarts the
// vector from seeded noise and sets reinitialized_last_step.
PowerIterState power_step(const ConvKernel& k, const PowerIterState& s);

enum class SigmaMethod { power_conv, dense_svd, reshape_sn };

struct SigmaEstimate {
  double sigma = 0.0;
  std::size_t iterations = 0;
  SigmaMethod method = SigmaMethod::power_conv;
};

const char* to_string(SigmaMethod m);

// Rayleigh estimate <u, K(v)>.
SigmaEstimate sigma_from_state(const ConvKernel& k, const PowerIterState& s);

// weights * c / sigma. With `project`, only shrinks: weights * min(1, c / sigma).
ConvKernel normalize_kernel(const ConvKernel& k, const SigmaEstimate& sigma, double c, bool project = false);

// Largest c_in*h*w accepted by dense_sigma.
inline constexpr std::size_t kDenseGuard = 4096;

// Exact operator norm on an h x w zero-padded grid from the materialised matrix.
SigmaEstimate dense_sigma(const ConvKernel& k, std::size_t height, std::size_t width);

// Spectral norm of the (c_out, c_in*kh*kw) reshaped kernel by power iteration.
SigmaEstimate reshape_sn_sigma(const ConvKernel& k);

// Persistent vectors for reshape-SN training: u in R^{c_out}, v in R^{c_in*kh*kw}.
struct ReshapePowerState {
  std::vector<double> u;
  std::vector<double> v;
};

ReshapePowerState init_reshape_state(const ConvKernel& k, RngSeed seed);
// One SN power step on the reshaped matrix; returns the updated state and u^T W v.
std::pair<ReshapePowerState, double> reshape_power_step(const ConvKernel& k, const ReshapePowerState& s);

// Kernel file: "PNPK <c_out> <c_in> <kh> <kw>\n" + little-endian binary64 weights.
inline constexpr const char* kKernelMagic = "PNPK";

void write_kernel(std::ostream& os, const ConvKernel& k);
ConvKernel read_kernel(std::istream& is);
void save_kernel(const std::filesystem::path& path, const ConvKernel& k);
ConvKernel load_kernel(const std::filesystem::path& path);

}  // namespace pnp
