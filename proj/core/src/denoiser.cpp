#include "pnp/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "pnp/conv.hpp"
#include "pnp/errors.hpp"

namespace pnp {

namespace {

class IdentityDenoiser final : public Denoiser {
 public:
  std::string name() const override { return "identity"; }
  Tensor apply(const Tensor& x) const override { return x; }
  std::optional<double> eps_bound() const override { return 0.0; }
};

class OrthogonalResidualDenoiser final : public Denoiser {
 public:
  explicit OrthogonalResidualDenoiser(double eps) : eps_(eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("orthogonal_residual_denoiser: eps must be >= 0");
  }
  std::string name() const override { return "orthogonal"; }
  Tensor apply(const Tensor& x) const override {
    Tensor out = x;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out[i] += eps_ * x[n - 1 - i];
    return out;
  }
  std::optional<double> eps_bound() const override { return eps_; }

 private:
  double eps_;
};

Tensor box_filter(const Tensor& x) {
  Tensor out(x.shape());
  const auto H = static_cast<std::ptrdiff_t>(x.height()), W = static_cast<std::ptrdiff_t>(x.width());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t w = 0; w < W; ++w) {
        double s = 0.0;
        for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
          for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
            const std::ptrdiff_t yy = y + dy, xx = w + dx;
            if (yy >= 0 && yy < H && xx >= 0 && xx < W) s += x(c, yy, xx);
          }
        out(c, y, w) = s / 9.0;
      }
  return out;
}

class BlurBlendDenoiser final : public Denoiser {
 public:
  BlurBlendDenoiser(double lambda, Shape shape) : lambda_(lambda), shape_(shape) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("blur_blend_denoiser: lambda must lie in [0, 1]");
    if (lambda == 0.0) {
      eps_ = 0.0;
    } else {
      // B - I on one channel; channels do not mix, so the norm is the same for all.
      ConvKernel residual(1, 1, 3, 3, std::vector<double>(9, 1.0 / 9.0));
      residual(0, 0, 1, 1) -= 1.0;
      eps_ = lambda * dense_sigma(residual, shape.height, shape.width).sigma;
    }
  }
  std::string name() const override { return "blur"; }
  Tensor apply(const Tensor& x) const override {
    if (x.height() != shape_.height || x.width() != shape_.width) {
      throw ShapeError("blur_blend_denoiser: input grid differs from the certified grid");
    }
    Tensor out = box_filter(x);
    out *= lambda_;
    out.axpy(1.0 - lambda_, x);
    return out;
  }
  std::optional<double> eps_bound() const override { return eps_; }

 private:
  double lambda_;
  Shape shape_;
  double eps_ = 0.0;
};

class CnnDenoiser final : public Denoiser {
 public:
  CnnDenoiser(SimpleCNNModel m, double sigma) : model_(std::move(m)), sigma_(sigma) { model_.validate(); }
  std::string name() const override { return "cnn"; }
  Tensor apply(const Tensor& y) const override { return y - forward(model_, y); }
  double sigma() const override { return sigma_; }
  std::optional<double> eps_bound() const override {
    if (model_.norm_mode == NormMode::real_sn) return model_.lipschitz_target();
    return std::nullopt;
  }

 private:
  SimpleCNNModel model_;
  double sigma_;
};

class ChannelwiseDenoiser final : public Denoiser {
 public:
  explicit ChannelwiseDenoiser(DenoiserPtr inner) : inner_(std::move(inner)) {}
  std::string name() const override { return "channelwise(" + inner_->name() + ")"; }
  Tensor apply(const Tensor& x) const override {
    Tensor out(x.shape());
    const std::size_t plane = x.shape().plane();
    Tensor channel(Shape{1, x.height(), x.width()});
    for (std::size_t c = 0; c < x.channels(); ++c) {
      std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(c * plane), plane, channel.values().begin());
      const Tensor r = inner_->apply(channel);
      std::copy_n(r.values().begin(), plane, out.values().begin() + static_cast<std::ptrdiff_t>(c * plane));
    }
    return out;
  }
  double sigma() const override { return inner_->sigma(); }
  std::optional<double> eps_bound() const override { return inner_->eps_bound(); }

 private:
  DenoiserPtr inner_;
};

class NonnegativeDenoiser final : public Denoiser {
 public:
  explicit NonnegativeDenoiser(DenoiserPtr inner) : inner_(std::move(inner)) {}
  std::string name() const override { return "nonnegative(" + inner_->name() + ")"; }
  Tensor apply(const Tensor& x) const override {
    Tensor out = inner_->apply(x);
    for (double& v : out.values()) v = std::max(v, 0.0);
    return out;
  }
  double sigma() const override { return inner_->sigma(); }
  std::optional<double> eps_bound() const override { return std::nullopt; }

 private:
  DenoiserPtr inner_;
};

}  // namespace

DenoiserPtr identity_denoiser() { return std::make_shared<IdentityDenoiser>(); }
DenoiserPtr orthogonal_residual_denoiser(double eps) { return std::make_shared<OrthogonalResidualDenoiser>(eps); }
DenoiserPtr blur_blend_denoiser(double lambda, Shape shape) { return std::make_shared<BlurBlendDenoiser>(lambda, shape); }
DenoiserPtr cnn_denoiser(SimpleCNNModel model, double sigma) {
  return std::make_shared<CnnDenoiser>(std::move(model), sigma);
}
DenoiserPtr channelwise_denoiser(DenoiserPtr inner) { return std::make_shared<ChannelwiseDenoiser>(std::move(inner)); }
DenoiserPtr nonnegative_denoiser(DenoiserPtr inner) { return std::make_shared<NonnegativeDenoiser>(std::move(inner)); }

const char* to_string(PairScheme s) {
  return s == PairScheme::iterates_vs_limit ? "iterates_vs_limit" : "random_pairs";
}

EpsEstimate estimate_eps(const Denoiser& d, std::span<const TensorPair> pairs, PairScheme scheme) {
  if (pairs.empty()) throw DomainError("estimate_eps: no pairs");
  EpsEstimate est;
  est.pair_scheme = scheme;
  for (const auto& [x, y] : pairs) {
    const double dxy = distance(x, y);
    if (dxy == 0.0) {
      ++est.degenerate_pairs;
      continue;
    }
    const Tensor rx = d.apply(x) - x;
    const Tensor ry = d.apply(y) - y;
    const double r = distance(rx, ry) / dxy;
    est.ratios.push_back(r);
    est.max_ratio = std::max(est.max_ratio, r);
  }
  return est;
}

std::vector<TensorPair> iterate_pairs_from_trace(const IterTrace& trace) {
  if (!trace.converged()) {
    throw DomainError("iterate_pairs_from_trace: trace did not converge; use random pairs instead");
  }
  std::vector<TensorPair> out;
  for (const auto& x : trace.iterates) {
    if (distance(x, trace.final_iterate) > 0.0) out.emplace_back(x, trace.final_iterate);
  }
  return out;
}

std::vector<TensorPair> random_pairs(Shape shape, std::size_t n, Rng& rng, double lo, double hi, double spread) {
  std::vector<TensorPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x = random_uniform(shape, rng, lo, hi);
    Tensor y = x + random_normal(shape, rng, spread);
    out.emplace_back(std::move(x), std::move(y));
  }
  return out;
}

}  // namespace pnp
