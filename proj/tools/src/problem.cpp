#include "pnp_cli/problem.hpp"

#include <algorithm>
#include <cmath>

#include "pnp/cnn.hpp"
#include "pnp/errors.hpp"

namespace pnp::cli {

namespace {

Tensor scaled_truth(const FidelitySpec& spec, RngSeed seed) {
  Tensor t = spec.truth ? load_image(*spec.truth) : make_patches(1, spec.size, derive_seed(seed, 1)).patches[0];
  double mx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) mx = std::max(mx, t[i]);
  if (mx > 0.0) t *= spec.peak / mx;
  return t;
}

Tensor integer_counts(const Tensor& t, const char* what, double max = INFINITY) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 0.0 || t[i] != std::floor(t[i]) || t[i] > max)
      throw FormatError(std::string(what) + ": entries must be integers in range");
  }
  return t;
}

}  // namespace

Problem build_problem(const FidelitySpec& spec, RngSeed seed) {
  Problem p;
  p.peak = spec.peak;
  p.truth = scaled_truth(spec, seed);
  Rng rng(derive_seed(seed, 2));
  const Shape s = p.truth.shape();

  if (spec.model == "quadratic") {
    Tensor b = spec.observation ? load_image(*spec.observation) : p.truth + random_normal(s, rng, spec.noise_sigma);
    p.f = quadratic_model(b);
    p.observation = b;
    p.estimate = b;
  } else if (spec.model == "poisson") {
    Tensor y(s);
    if (spec.observation) {
      y = integer_counts(load_image(*spec.observation), "poisson observation");
    } else {
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = double(rng.poisson(p.truth[i]));
    }
    p.f = poisson_model(y);
    p.observation = y;
    p.estimate = y;
  } else if (spec.model == "qis") {
    QisObservation q;
    if (spec.observation) {
      const Tensor ones = integer_counts(load_image(*spec.observation), "qis observation", spec.oversample);
      q.shape = ones.shape();
      q.sensor_gain = spec.gain;
      q.oversample = spec.oversample;
      for (std::size_t i = 0; i < ones.size(); ++i) q.ones.push_back(std::uint32_t(ones[i]));
    } else {
      q = simulate_qis(p.truth, spec.gain, spec.oversample, rng);
    }
    p.observation = Tensor(q.shape);
    p.estimate = Tensor(q.shape);
    // Per-pixel maximum-likelihood intensity with a half-count guard at 0 and K.
    const double beta = spec.gain / spec.oversample;
    for (std::size_t i = 0; i < q.ones.size(); ++i) {
      p.observation[i] = q.ones[i];
      const double frac = (q.ones[i] + 0.5) / (spec.oversample + 1.0);
      p.estimate[i] = -std::log1p(-frac) / beta;
    }
    p.f = qis_model(std::move(q));
  } else {
    Tensor x = p.truth;
    if (x.channels() == 1) {
      x = Tensor(Shape{2, s.height, s.width});
      for (std::size_t i = 0; i < s.size(); ++i) x[i] = p.truth[i];
      p.truth = x;
    }
    if (x.channels() != 2) throw FormatError("mri truth must have 1 (real) or 2 (complex) channels");
    Mask m = spec.mask ? load_mask(*spec.mask) : random_mask(s.height, s.width, spec.mask_rate, derive_seed(seed, 3));
    MriProblem mp = simulate_mri(x, m, spec.noise_sigma, rng);
    p.mask = m;
    p.observation = zero_filled(mp);
    p.estimate = p.observation;
    p.f = mri_model(std::move(mp));
  }
  return p;
}

DenoiserPtr build_denoiser(const DenoiserSpec& spec, Shape image) {
  DenoiserPtr d;
  if (spec.kind == "identity") {
    d = identity_denoiser();
  } else if (spec.kind == "orthogonal") {
    d = orthogonal_residual_denoiser(spec.eps);
  } else if (spec.kind == "blur") {
    d = blur_blend_denoiser(spec.lambda, Shape{1, image.height, image.width});
    if (image.channels > 1) d = channelwise_denoiser(d);
  } else {
    SimpleCNNModel m = load_model(*spec.model);
    const std::size_t c = m.image_channels();
    d = cnn_denoiser(std::move(m), spec.sigma);
    if (c != image.channels) {
      if (c != 1) throw ShapeError("cnn model expects " + std::to_string(c) + " channels, images have " +
                                   std::to_string(image.channels));
      d = channelwise_denoiser(d);
    }
  }
  if (spec.nonnegative) d = nonnegative_denoiser(d);
  return d;
}

Tensor initial_point(const Problem& p, const RunSpec& run) {
  if (run.init == "zero") return Tensor(p.truth.shape());
  return p.estimate;
}

}  // namespace pnp::cli
