#include "pnp/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pnp/errors.hpp"
#include "pnp/image_io.hpp"

namespace pnp {

const char* to_string(NormMode m) {
  switch (m) {
    case NormMode::none: return "none";
    case NormMode::real_sn: return "realsn";
    case NormMode::reshape_sn: return "reshapesn";
  }
  return "none";
}

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "none") return NormMode::none;
  if (s == "realsn" || s == "realSN" || s == "real_sn") return NormMode::real_sn;
  if (s == "reshapesn" || s == "reshapeSN" || s == "reshape_sn" || s == "sn") return NormMode::reshape_sn;
  throw DomainError("unknown norm mode '" + s + "'");
}

double SimpleCNNModel::lipschitz_target() const {
  return std::accumulate(c_targets.begin(), c_targets.end(), 1.0, std::multiplies<>());
}

void SimpleCNNModel::validate() const {
  if (layers.empty()) throw ShapeError("SimpleCNNModel: no layers");
  if (c_targets.size() != layers.size()) throw ShapeError("SimpleCNNModel: one target constant per layer required");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& k = layers[l].kernel;
    if (layers[l].bias.size() != k.c_out()) throw ShapeError("SimpleCNNModel: bias length differs from c_out");
    if (l > 0 && k.c_in() != layers[l - 1].kernel.c_out()) {
      throw ShapeError("SimpleCNNModel: layer " + std::to_string(l) + " input channels do not chain");
    }
    if (!(c_targets[l] > 0.0)) throw DomainError("SimpleCNNModel: target constants must be positive");
  }
  if (layers.back().kernel.c_out() != image_channels()) {
    throw ShapeError("SimpleCNNModel: last layer must return the image channel count");
  }
}

SimpleCNNModel make_simple_cnn(const CnnShape& shape, NormMode mode, double lipschitz_target, RngSeed seed) {
  if (shape.depth == 0 || shape.image_channels == 0 || shape.hidden == 0) {
    throw DomainError("make_simple_cnn: depth and channel counts must be positive");
  }
  if (!(lipschitz_target > 0.0)) throw DomainError("make_simple_cnn: Lipschitz target must be positive");
  SimpleCNNModel m;
  m.norm_mode = mode;
  Rng rng(seed);
  for (std::size_t l = 0; l < shape.depth; ++l) {
    const std::size_t c_in = l == 0 ? shape.image_channels : shape.hidden;
    const std::size_t c_out = l + 1 == shape.depth ? shape.image_channels : shape.hidden;
    ConvKernel k(c_out, c_in, shape.kernel, shape.kernel);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(c_in * shape.kernel * shape.kernel));
    for (double& w : k.weights()) w = std_dev * rng.normal();
    m.layers.push_back(ConvLayer{std::move(k), std::vector<double>(c_out, 0.0)});
  }
  m.c_targets.assign(shape.depth, std::pow(lipschitz_target, 1.0 / static_cast<double>(shape.depth)));
  return m;
}

namespace {

void add_bias(Tensor& z, const std::vector<double>& b) {
  const std::size_t plane = z.shape().plane();
  for (std::size_t c = 0; c < z.channels(); ++c) {
    double* p = z.values().data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
  }
}

void relu_inplace(Tensor& z) {
  for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
}

// dK[o,i,ky,kx] += sum_p g[o,p] * a[i, p + offset(ky,kx)], zero padding.
void accumulate_kernel_grad(const Tensor& g, const Tensor& a, const ConvKernel& k, std::vector<double>& dk) {
  const auto H = static_cast<std::ptrdiff_t>(a.height()), W = static_cast<std::ptrdiff_t>(a.width());
  const auto ph = static_cast<std::ptrdiff_t>(k.kh() / 2), pw = static_cast<std::ptrdiff_t>(k.kw() / 2);
  const std::size_t plane = a.shape().plane();
  for (std::size_t o = 0; o < k.c_out(); ++o) {
    const double* go = g.values().data() + o * plane;
    for (std::size_t i = 0; i < k.c_in(); ++i) {
      const double* ai = a.values().data() + i * plane;
      for (std::size_t ky = 0; ky < k.kh(); ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
        for (std::size_t kx = 0; kx < k.kw(); ++kx) {
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx), x1 = std::min(W, W - dx);
          double s = 0.0;
          for (std::ptrdiff_t yy = y0; yy < y1; ++yy) {
            const double* grow = go + yy * W;
            const double* arow = ai + (yy + dy) * W + dx;
            for (std::ptrdiff_t xx = x0; xx < x1; ++xx) s += grow[xx] * arow[xx];
          }
          dk[((o * k.c_in() + i) * k.kh() + ky) * k.kw() + kx] += s;
        }
      }
    }
  }
}

}  // namespace

Tensor forward(const SimpleCNNModel& m, const Tensor& y) {
  if (m.layers.empty()) throw ShapeError("forward: empty model");
  if (y.channels() != m.image_channels()) {
    throw ShapeError("forward: image has " + std::to_string(y.channels()) + " channels, model expects " +
                     std::to_string(m.image_channels()));
  }
  Tensor a = y;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    Tensor z = conv_forward(m.layers[l].kernel, a);
    add_bias(z, m.layers[l].bias);
    if (l + 1 < m.layers.size()) relu_inplace(z);
    a = std::move(z);
  }
  return a;
}

CnnGradients CnnGradients::zeros_like(const SimpleCNNModel& m) {
  CnnGradients g;
  for (const auto& layer : m.layers) {
    g.kernel.emplace_back(layer.kernel.size(), 0.0);
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

CnnGradients& CnnGradients::operator*=(double s) {
  for (auto& v : kernel)
    for (double& x : v) x *= s;
  for (auto& v : bias)
    for (double& x : v) x *= s;
  return *this;
}

double backward(const SimpleCNNModel& m, const Tensor& y, const Tensor& target_residual, CnnGradients& grads) {
  if (y.channels() != m.image_channels()) throw ShapeError("backward: channel mismatch");
  require_same_shape(y, target_residual, "backward");
  const std::size_t depth = m.layers.size();

  // acts[l] is the input of layer l; pre-activations kept for the ReLU mask.
  std::vector<Tensor> acts{y};
  std::vector<Tensor> pre;
  for (std::size_t l = 0; l < depth; ++l) {
    Tensor z = conv_forward(m.layers[l].kernel, acts.back());
    add_bias(z, m.layers[l].bias);
    pre.push_back(z);
    if (l + 1 < depth) {
      relu_inplace(z);
      acts.push_back(std::move(z));
    }
  }
  const Tensor& out = pre.back();
  const double n = static_cast<double>(out.size());
  double loss = 0.0;
  Tensor g(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out[i] - target_residual[i];
    loss += d * d;
    g[i] = 2.0 * d / n;
  }
  loss /= n;

  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = m.layers[l];
    accumulate_kernel_grad(g, acts[l], layer.kernel, grads.kernel[l]);
    const std::size_t plane = g.shape().plane();
    for (std::size_t o = 0; o < layer.kernel.c_out(); ++o) {
      const double* p = g.values().data() + o * plane;
      grads.bias[l][o] += std::accumulate(p, p + plane, 0.0);
    }
    if (l == 0) break;
    Tensor prev = conv_adjoint(layer.kernel, g);
    const Tensor& z = pre[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (!(z[i] > 0.0)) prev[i] = 0.0;
    }
    g = std::move(prev);
  }
  return loss;
}

AdamState AdamState::for_model(const SimpleCNNModel& model) {
  AdamState s;
  s.m = CnnGradients::zeros_like(model);
  s.v = CnnGradients::zeros_like(model);
  return s;
}

void AdamState::apply(SimpleCNNModel& model, const CnnGradients& g, double lr) {
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  auto update = [&](std::vector<double>& param, const std::vector<double>& grad, std::vector<double>& mm,
                    std::vector<double>& vv) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      mm[i] = beta1 * mm[i] + (1.0 - beta1) * grad[i];
      vv[i] = beta2 * vv[i] + (1.0 - beta2) * grad[i] * grad[i];
      param[i] -= lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].kernel.weights(), g.kernel[l], m.kernel[l], v.kernel[l]);
    update(model.layers[l].bias, g.bias[l], m.bias[l], v.bias[l]);
  }
}

PatchSet make_patches(std::size_t n, std::size_t size, RngSeed seed) {
  if (n == 0 || size == 0) throw DomainError("make_patches: count and size must be positive");
  PatchSet set;
  set.size = size;
  set.seed = seed;
  set.patches.reserve(n);
  Rng rng(seed);
  for (std::size_t p = 0; p < n; ++p) {
    Tensor t(Shape{1, size, size}, rng.uniform());
    const auto rects = 2 + rng.below(4);
    for (std::uint64_t r = 0; r < rects; ++r) {
      const double level = rng.uniform();
      std::size_t y0 = rng.below(size), y1 = rng.below(size);
      std::size_t x0 = rng.below(size), x1 = rng.below(size);
      if (y0 > y1) std::swap(y0, y1);
      if (x0 > x1) std::swap(x0, x1);
      for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t x = x0; x <= x1; ++x) t(0, y, x) = level;
    }
    set.patches.push_back(std::move(t));
  }
  return set;
}

namespace {

struct SpectralState {
  std::vector<PowerIterState> real;
  std::vector<ReshapePowerState> reshape;
};

void normalize_layers(SimpleCNNModel& m, SpectralState& st, const TrainConfig& cfg, std::size_t power_steps) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& k = m.layers[l].kernel;
    if (m.norm_mode == NormMode::real_sn) {
      for (std::size_t s = 0; s < power_steps; ++s) st.real[l] = power_step(k, st.real[l]);
      const SigmaEstimate sigma = sigma_from_state(k, st.real[l]);
      if (sigma.sigma > 0.0) k = normalize_kernel(k, sigma, m.c_targets[l], cfg.project);
    } else if (m.norm_mode == NormMode::reshape_sn) {
      double est = 0.0;
      for (std::size_t s = 0; s < power_steps; ++s) {
        auto [next, sigma] = reshape_power_step(k, st.reshape[l]);
        st.reshape[l] = std::move(next);
        est = sigma;
      }
      if (est > 0.0) k = normalize_kernel(k, SigmaEstimate{est, 1, SigmaMethod::reshape_sn}, m.c_targets[l], cfg.project);
    }
  }
}

}  // namespace

TrainResult train(SimpleCNNModel m, const TrainConfig& cfg, const PatchSet& data) {
  m.validate();
  if (cfg.batch_size == 0) throw DomainError("train: batch size must be positive");
  if (!(cfg.noise_sigma > 0.0)) throw DomainError("train: noise sigma must be positive");
  if (data.patches.empty()) throw DomainError("train: empty patch set");
  if (data.patches.front().channels() != m.image_channels()) throw ShapeError("train: patch channels differ from model");

  TrainResult result;
  const Shape pshape = data.patches.front().shape();
  SpectralState st;
  for (std::size_t l = 0; l < m.depth(); ++l) {
    // One persistent state per layer, seeded by layer index.
    st.real.push_back(init_power_state(m.layers[l].kernel, pshape.height, pshape.width, derive_seed(cfg.seed, 1000 + l)));
    st.reshape.push_back(init_reshape_state(m.layers[l].kernel, derive_seed(cfg.seed, 2000 + l)));
  }

  AdamState adam = AdamState::for_model(m);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = 2 * epoch < cfg.epochs ? cfg.lr : cfg.lr_late;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      normalize_layers(m, st, cfg, 1);
      CnnGradients grads = CnnGradients::zeros_like(m);
      for (std::size_t b = start; b < stop; ++b) {
        const Tensor& clean = data.patches[order[b]];
        Tensor noise = random_normal(clean.shape(), rng, cfg.noise_sigma);
        const Tensor noisy = clean + noise;
        const double loss = backward(m, noisy, noise, grads);
        if (!std::isfinite(loss)) {
          throw NumericalError("train: loss became non-finite at epoch " + std::to_string(epoch) + ", sample " +
                               std::to_string(b));
        }
        epoch_loss += loss;
      }
      grads *= 1.0 / static_cast<double>(stop - start);
      adam.apply(m, grads, lr);
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  if (cfg.epochs > 0) normalize_layers(m, st, cfg, std::max<std::size_t>(1, cfg.final_power_steps));
  result.model = std::move(m);
  return result;
}

void write_model(std::ostream& os, const SimpleCNNModel& m) {
  m.validate();
  const std::size_t hidden = m.depth() > 1 ? m.layers.front().kernel.c_out() : m.image_channels();
  os << kModelMagic << ' ' << m.depth() << ' ' << m.image_channels() << ' ' << hidden << ' ' << to_string(m.norm_mode);
  char buf[64];
  for (double c : m.c_targets) {
    std::snprintf(buf, sizeof buf, " %.17g", c);
    os << buf;
  }
  os << '\n';
  for (const auto& layer : m.layers) {
    write_kernel(os, layer.kernel);
    write_kernel(os, ConvKernel(layer.bias.size(), 1, 1, 1, layer.bias));
  }
}

SimpleCNNModel read_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("missing PNPM header");
  std::istringstream ss(line);
  std::string magic, mode;
  std::size_t depth = 0, channels = 0, hidden = 0;
  if (!(ss >> magic >> depth >> channels >> hidden >> mode) || magic != kModelMagic) {
    throw FormatError("bad PNPM header: '" + line + "'");
  }
  SimpleCNNModel m;
  try {
    m.norm_mode = norm_mode_from_string(mode);
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }
  for (std::size_t l = 0; l < depth; ++l) {
    double c = 0.0;
    if (!(ss >> c)) throw FormatError("PNPM header lists fewer target constants than layers");
    m.c_targets.push_back(c);
  }
  for (std::size_t l = 0; l < depth; ++l) {
    ConvKernel k = read_kernel(is);
    ConvKernel b = read_kernel(is);
    if (b.c_in() != 1 || b.kh() != 1 || b.kw() != 1) throw FormatError("bias block must have shape (c_out,1,1,1)");
    m.layers.push_back(ConvLayer{std::move(k), b.weights()});
  }
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("inconsistent model file: ") + e.what());
  }
  if (m.image_channels() != channels) throw FormatError("PNPM channel count disagrees with layer blocks");
  return m;
}

void save_model(const std::filesystem::path& path, const SimpleCNNModel& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_model(os, m);
}

SimpleCNNModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path.string());
  return read_model(is);
}

}  // namespace pnp
