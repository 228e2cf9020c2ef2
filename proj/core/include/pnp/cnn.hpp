#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pnp/conv.hpp"
#include "pnp/rng.hpp"
#include "pnp/tensor.hpp"

namespace pnp {

enum class NormMode { none, real_sn, reshape_sn };

const char* to_string(NormMode m);
NormMode norm_mode_from_string(const std::string& s);

struct ConvLayer {
  ConvKernel kernel;
  std::vector<double> bias;  // length c_out

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

// Residual CNN R: conv -> ReLU -> ... -> conv, no activation after the last
// layer. The denoiser built from it is H(y) = y - R(y).
struct SimpleCNNModel {
  std::vector<ConvLayer> layers;
  NormMode norm_mode = NormMode::none;
  std::vector<double> c_targets;  // per-layer spectral-norm targets

  std::size_t depth() const { return layers.size(); }
  std::size_t image_channels() const { return layers.empty() ? 0 : layers.front().kernel.c_in(); }
  // Product of the per-layer targets: the Lipschitz bound on R under realSN.
  double lipschitz_target() const;
  // Checks channel chaining, bias lengths and target count.
  void validate() const;

  friend bool operator==(const SimpleCNNModel&, const SimpleCNNModel&) = default;
};

struct CnnShape {
  std::size_t image_channels = 1;
  std::size_t depth = 4;
  std::size_t hidden = 8;
  std::size_t kernel = 3;
};

// He-normal weights, zero biases, c_l = C^(1/depth) for a global target C.
SimpleCNNModel make_simple_cnn(const CnnShape& shape, NormMode mode, double lipschitz_target, RngSeed seed);

// Residual R(y).
Tensor forward(const SimpleCNNModel& m, const Tensor& y);

// Parameter-shaped accumulator for backward().
struct CnnGradients {
  std::vector<std::vector<double>> kernel;
  std::vector<std::vector<double>> bias;

  static CnnGradients zeros_like(const SimpleCNNModel& m);
  CnnGradients& operator*=(double s);
};

// Adds the gradient of mean((R(y) - target)^2) to `grads`; returns the loss.
// ReLU's derivative at 0 is taken as 0.
double backward(const SimpleCNNModel& m, const Tensor& y, const Tensor& target_residual, CnnGradients& grads);

// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
struct AdamState {
  CnnGradients m, v;
  std::size_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState for_model(const SimpleCNNModel& model);
  void apply(SimpleCNNModel& model, const CnnGradients& g, double lr);
};

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double lr_late = 1e-4;             // used from the halfway epoch on
  double noise_sigma = 40.0 / 255.0;
  RngSeed seed{1};
  bool project = false;              // shrink-only normalisation instead of division
  std::size_t final_power_steps = 200;  // extra power steps before the closing normalisation
};

// Clean training patches in [0, 1].
struct PatchSet {
  std::vector<Tensor> patches;
  std::size_t size = 16;
  RngSeed seed{};
};

// Piecewise-constant patches: 2-5 axis-aligned rectangles of random
// intensity over a random background.
PatchSet make_patches(std::size_t n, std::size_t size, RngSeed seed);

struct TrainResult {
  SimpleCNNModel model;
  std::vector<double> epoch_loss;  // mean per-sample loss of each epoch
};

// Minibatch Adam on y = x + N(0, sigma^2), target residual y - x. Under
// realSN/reshapeSN each step first runs one power step per layer and
// normalises the kernels; the returned model is normalised once more at the end.
TrainResult train(SimpleCNNModel m, const TrainConfig& cfg, const PatchSet& data);

// Model file:
//   "PNPM <depth> <image_channels> <hidden> <norm_mode> <c_1> ... <c_depth>\n"
// then per layer a PNPK kernel block and a PNPK (c_out, 1, 1, 1) bias block.
inline constexpr const char* kModelMagic = "PNPM";

void write_model(std::ostream& os, const SimpleCNNModel& m);
SimpleCNNModel read_model(std::istream& is);
void save_model(const std::filesystem::path& path, const SimpleCNNModel& m);
SimpleCNNModel load_model(const std::filesystem::path& path);

}  // namespace pnp
