#include "pnp/conv.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "pnp/errors.hpp"
#include "pnp/image_io.hpp"

namespace pnp {

ConvKernel::ConvKernel(std::size_t c_out, std::size_t c_in, std::size_t kh, std::size_t kw)
    : ConvKernel(c_out, c_in, kh, kw, std::vector<double>(c_out * c_in * kh * kw, 0.0)) {}

ConvKernel::ConvKernel(std::size_t c_out, std::size_t c_in, std::size_t kh, std::size_t kw, std::vector<double> weights)
    : c_out_(c_out), c_in_(c_in), kh_(kh), kw_(kw), weights_(std::move(weights)) {
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("ConvKernel: spatial extents must be odd");
  if (weights_.size() != c_out * c_in * kh * kw) throw ShapeError("ConvKernel: weight count does not match shape");
  for (double w : weights_) {
    if (!std::isfinite(w)) throw DomainError("ConvKernel: non-finite weight");
  }
}

ConvKernel ConvKernel::scaled(double s) const {
  ConvKernel out = *this;
  for (double& w : out.weights_) w *= s;
  return out;
}

ConvKernel adjoint_kernel(const ConvKernel& k) {
  ConvKernel a(k.c_in(), k.c_out(), k.kh(), k.kw());
  for (std::size_t o = 0; o < k.c_out(); ++o)
    for (std::size_t i = 0; i < k.c_in(); ++i)
      for (std::size_t y = 0; y < k.kh(); ++y)
        for (std::size_t x = 0; x < k.kw(); ++x) a(i, o, k.kh() - 1 - y, k.kw() - 1 - x) = k(o, i, y, x);
  return a;
}

Tensor conv_forward(const ConvKernel& k, const Tensor& x) {
  if (x.channels() != k.c_in()) {
    throw ShapeError("conv_forward: input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                     std::to_string(k.c_in()));
  }
  const auto H = static_cast<std::ptrdiff_t>(x.height()), W = static_cast<std::ptrdiff_t>(x.width());
  const auto ph = static_cast<std::ptrdiff_t>(k.kh() / 2), pw = static_cast<std::ptrdiff_t>(k.kw() / 2);
  Tensor out(Shape{k.c_out(), x.height(), x.width()});
  const double* in = x.values().data();
  double* dst = out.values().data();
  for (std::size_t o = 0; o < k.c_out(); ++o) {
    double* plane_out = dst + o * x.shape().plane();
    for (std::size_t i = 0; i < k.c_in(); ++i) {
      const double* plane_in = in + i * x.shape().plane();
      for (std::size_t ky = 0; ky < k.kh(); ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - ph;
        for (std::size_t kx = 0; kx < k.kw(); ++kx) {
          const double wgt = k(o, i, ky, kx);
          if (wgt == 0.0) continue;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx), x1 = std::min(W, W - dx);
          const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
          for (std::ptrdiff_t yy = y0; yy < y1; ++yy) {
            double* row_out = plane_out + yy * W;
            const double* row_in = plane_in + (yy + dy) * W + dx;
            for (std::ptrdiff_t xx = x0; xx < x1; ++xx) row_out[xx] += wgt * row_in[xx];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv_adjoint(const ConvKernel& k, const Tensor& u) {
  if (u.channels() != k.c_out()) {
    throw ShapeError("conv_adjoint: input has " + std::to_string(u.channels()) + " channels, kernel produces " +
                     std::to_string(k.c_out()));
  }
  return conv_forward(adjoint_kernel(k), u);
}

namespace {

Tensor unit_noise(Shape shape, Rng& rng) {
  Tensor t = random_normal(shape, rng);
  const double n = norm2(t);
  if (n > 0.0) t *= 1.0 / n;
  return t;
}

}  // namespace

PowerIterState init_power_state(const ConvKernel& k, std::size_t height, std::size_t width, RngSeed seed) {
  Rng rng(seed);
  PowerIterState s;
  s.u = unit_noise(Shape{k.c_out(), height, width}, rng);
  s.v = unit_noise(Shape{k.c_in(), height, width}, rng);
  s.reseed = derive_seed(seed, 0xC0FFEE);
  return s;
}

PowerIterState power_step(const ConvKernel& k, const PowerIterState& s) {
  PowerIterState next;
  next.reseed = s.reseed;
  next.reinitializations = s.reinitializations;

  auto restart = [&](Shape shape) {
    Rng rng(derive_seed(next.reseed, next.reinitializations++));
    next.reinitialized_last_step = true;
    return unit_noise(shape, rng);
  };

  Tensor v = conv_adjoint(k, s.u);
  double nv = norm2(v);
  if (nv == 0.0) {
    v = restart(s.v.shape());
  } else {
    v *= 1.0 / nv;
  }
  Tensor u = conv_forward(k, v);
  const double nu = norm2(u);
  if (nu == 0.0) {
    u = restart(s.u.shape());
  } else {
    u *= 1.0 / nu;
  }
  next.u = std::move(u);
  next.v = std::move(v);
  return next;
}

const char* to_string(SigmaMethod m) {
  switch (m) {
    case SigmaMethod::power_conv: return "power_conv";
    case SigmaMethod::dense_svd: return "dense_svd";
    case SigmaMethod::reshape_sn: return "reshape_sn";
  }
  return "unknown";
}

SigmaEstimate sigma_from_state(const ConvKernel& k, const PowerIterState& s) {
  return SigmaEstimate{inner(s.u, conv_forward(k, s.v)), 1, SigmaMethod::power_conv};
}

ConvKernel normalize_kernel(const ConvKernel& k, const SigmaEstimate& sigma, double c, bool project) {
  if (!(sigma.sigma > 0.0)) throw DomainError("normalize_kernel: sigma must be positive");
  if (!(c > 0.0)) throw DomainError("normalize_kernel: target constant must be positive");
  const double factor = project ? std::min(1.0, c / sigma.sigma) : c / sigma.sigma;
  return k.scaled(factor);
}

SigmaEstimate dense_sigma(const ConvKernel& k, std::size_t height, std::size_t width) {
  const std::size_t n = k.c_in() * height * width;
  const std::size_t m = k.c_out() * height * width;
  if (n > kDenseGuard) {
    throw DomainError("dense_sigma: c_in*h*w = " + std::to_string(n) + " exceeds the dense guard of " +
                      std::to_string(kDenseGuard));
  }
  if (n == 0 || m == 0) return SigmaEstimate{0.0, 0, SigmaMethod::dense_svd};

  // Column j is the response to the j-th basis image.
  Eigen::MatrixXd a(m, n);
  Tensor basis(Shape{k.c_in(), height, width});
  for (std::size_t j = 0; j < n; ++j) {
    basis[j] = 1.0;
    const Tensor col = conv_forward(k, basis);
    basis[j] = 0.0;
    for (std::size_t r = 0; r < m; ++r) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = col[r];
  }

  // sigma_max^2 is the top eigenvalue of the smaller Gram matrix.
  const bool tall = m >= n;
  const Eigen::Index g = static_cast<Eigen::Index>(tall ? n : m);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(g, g);
  if (tall) {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  } else {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.compute(gram, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("dense_sigma: eigenvalue solver failed");
  const double top = std::max(0.0, eig.eigenvalues()(g - 1));
  return SigmaEstimate{std::sqrt(top), 1, SigmaMethod::dense_svd};
}

namespace {

// W is (c_out) x (c_in*kh*kw) with the kernel's row-major order.
std::vector<double> reshape_mul(const ConvKernel& k, const std::vector<double>& v) {
  const std::size_t cols = k.size() / k.c_out();
  std::vector<double> out(k.c_out(), 0.0);
  for (std::size_t o = 0; o < k.c_out(); ++o)
    for (std::size_t j = 0; j < cols; ++j) out[o] += k.weights()[o * cols + j] * v[j];
  return out;
}

std::vector<double> reshape_mul_t(const ConvKernel& k, const std::vector<double>& u) {
  const std::size_t cols = k.size() / k.c_out();
  std::vector<double> out(cols, 0.0);
  for (std::size_t o = 0; o < k.c_out(); ++o)
    for (std::size_t j = 0; j < cols; ++j) out[j] += k.weights()[o * cols + j] * u[o];
  return out;
}

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void scale_to_unit(std::vector<double>& v) {
  const double n = vec_norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

}  // namespace

ReshapePowerState init_reshape_state(const ConvKernel& k, RngSeed seed) {
  Rng rng(seed);
  ReshapePowerState s;
  s.u.resize(k.c_out());
  s.v.resize(k.size() / std::max<std::size_t>(1, k.c_out()));
  for (double& x : s.u) x = rng.normal();
  for (double& x : s.v) x = rng.normal();
  scale_to_unit(s.u);
  scale_to_unit(s.v);
  return s;
}

std::pair<ReshapePowerState, double> reshape_power_step(const ConvKernel& k, const ReshapePowerState& s) {
  ReshapePowerState next;
  next.v = reshape_mul_t(k, s.u);
  scale_to_unit(next.v);
  next.u = reshape_mul(k, next.v);
  scale_to_unit(next.u);
  const auto wv = reshape_mul(k, next.v);
  double sigma = 0.0;
  for (std::size_t o = 0; o < wv.size(); ++o) sigma += next.u[o] * wv[o];
  return {std::move(next), sigma};
}

SigmaEstimate reshape_sn_sigma(const ConvKernel& k) {
  if (k.size() == 0) return SigmaEstimate{0.0, 0, SigmaMethod::reshape_sn};
  // Fixed-seed start so the estimate is reproducible; iterate until it settles.
  ReshapePowerState s = init_reshape_state(k, RngSeed{0x5157u});
  double prev = -1.0, sigma = 0.0;
  std::size_t it = 0;
  for (; it < 100000; ++it) {
    auto [next, est] = reshape_power_step(k, s);
    s = std::move(next);
    sigma = est;
    if (std::abs(sigma - prev) <= 1e-10 * std::max(1.0, std::abs(sigma)) && it > 2) break;
    prev = sigma;
  }
  return SigmaEstimate{std::max(0.0, sigma), it + 1, SigmaMethod::reshape_sn};
}

void write_kernel(std::ostream& os, const ConvKernel& k) {
  os << kKernelMagic << ' ' << k.c_out() << ' ' << k.c_in() << ' ' << k.kh() << ' ' << k.kw() << '\n';
  write_le_doubles(os, k.weights());
}

ConvKernel read_kernel(std::istream& is) {
  const auto d = read_header(is, kKernelMagic, 4);
  if (d[2] % 2 == 0 || d[3] % 2 == 0) throw FormatError("PNPK kernel extents must be odd");
  std::vector<double> w = read_le_doubles(is, d[0] * d[1] * d[2] * d[3]);
  try {
    return ConvKernel(d[0], d[1], d[2], d[3], std::move(w));
  } catch (const DomainError& e) {
    throw FormatError(std::string("PNPK: ") + e.what());
  }
}

void save_kernel(const std::filesystem::path& path, const ConvKernel& k) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  write_kernel(os, k);
}

ConvKernel load_kernel(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open for reading: " + path.string());
  return read_kernel(is);
}

}  // namespace pnp
