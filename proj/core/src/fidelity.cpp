#include "pnp/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pnp/dft.hpp"
#include "pnp/errors.hpp"

namespace pnp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_shape(const Tensor& x, const Shape& s, const char* what) {
  if (x.shape() != s) throw ShapeError(std::string(what) + ": input shape does not match the model");
}

class QuadraticModel final : public FidelityModel {
 public:
  explicit QuadraticModel(Tensor b) : b_(std::move(b)) {}

  std::string name() const override { return "quadratic"; }
  Shape shape() const override { return b_.shape(); }

  double eval(const Tensor& x) const override {
    const double d = distance(x, b_);
    return 0.5 * d * d;
  }
  Tensor grad(const Tensor& x) const override { return x - b_; }
  Tensor prox(double alpha, const Tensor& z) const override {
    if (alpha < 0.0) throw DomainError("quadratic prox: alpha must be nonnegative");
    require_same_shape(z, b_, "quadratic prox");
    Tensor out = z;
    out.axpy(alpha, b_);
    out *= 1.0 / (1.0 + alpha);
    return out;
  }
  std::optional<double> mu() const override { return 1.0; }
  std::optional<double> lip_grad() const override { return 1.0; }

 private:
  Tensor b_;
};

class PoissonModel final : public FidelityModel {
 public:
  explicit PoissonModel(Tensor y) : y_(std::move(y)) {
    for (double v : y_.values()) {
      if (v < 0.0 || v != std::floor(v)) throw DomainError("poisson_model: counts must be nonnegative integers");
    }
  }

  std::string name() const override { return "poisson"; }
  Shape shape() const override { return y_.shape(); }

  // l(x;y) = x - y log x. For y = 0 this is x on x >= 0, the branch the
  // closed-form prox max(z - alpha, 0) minimises.
  double eval(const Tensor& x) const override {
    require_shape(x, y_.shape(), "poisson eval");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i], yi = y_[i];
      if (xi < 0.0 || (xi == 0.0 && yi > 0.0)) return kInf;
      s += yi > 0.0 ? xi - yi * std::log(xi) : xi;
    }
    return s;
  }

  Tensor grad(const Tensor& x) const override {
    require_shape(x, y_.shape(), "poisson grad");
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i];
      if (xi < 0.0) throw DomainError("poisson grad: negative intensity");
      // Undefined at x = 0 when y > 0; set to 0 by convention.
      g[i] = xi > 0.0 ? 1.0 - y_[i] / xi : 0.0;
    }
    return g;
  }

  Tensor prox(double alpha, const Tensor& z) const override {
    if (!(alpha > 0.0)) throw DomainError("poisson prox: alpha must be positive");
    require_shape(z, y_.shape(), "poisson prox");
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = scalar::poisson_prox(alpha, z[i], y_[i]);
    return out;
  }

  std::optional<double> mu() const override { return std::nullopt; }
  std::optional<double> lip_grad() const override { return std::nullopt; }

 private:
  Tensor y_;
};

class QisModel final : public FidelityModel {
 public:
  explicit QisModel(QisObservation obs) : obs_(std::move(obs)), beta_(obs_.sensor_gain / obs_.oversample) {
    obs_.validate();
  }

  std::string name() const override { return "qis"; }
  Shape shape() const override { return obs_.shape; }

  double eval(const Tensor& x) const override {
    require_shape(x, obs_.shape, "qis eval");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      s += scalar::qis_value(x[j], obs_.zeros(j), obs_.ones[j], beta_);
      if (std::isinf(s)) return kInf;
    }
    return s;
  }

  Tensor grad(const Tensor& x) const override {
    require_shape(x, obs_.shape, "qis grad");
    Tensor g(x.shape());
    for (std::size_t j = 0; j < x.size(); ++j) g[j] = scalar::qis_derivative(x[j], obs_.zeros(j), obs_.ones[j], beta_);
    return g;
  }

  Tensor prox(double alpha, const Tensor& z) const override {
    if (!(alpha > 0.0)) throw DomainError("qis prox: alpha must be positive");
    require_shape(z, obs_.shape, "qis prox");
    Tensor out(z.shape());
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = scalar::qis_prox(alpha, z[j], obs_.zeros(j), obs_.ones[j], beta_);
    return out;
  }

  std::optional<double> mu() const override { return std::nullopt; }
  std::optional<double> lip_grad() const override { return std::nullopt; }

 private:
  QisObservation obs_;
  double beta_;
};

class MriModel final : public FidelityModel {
 public:
  explicit MriModel(MriProblem p) : p_(std::move(p)) {
    p_.validate();
    full_ = p_.mask.count() == p_.mask.cells.size();
  }

  std::string name() const override { return "mri"; }
  Shape shape() const override { return Shape{2, p_.mask.height, p_.mask.width}; }

  double eval(const Tensor& x) const override {
    require_shape(x, shape(), "mri eval");
    const ComplexImage k = dft2(to_complex(x));
    double s = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (p_.mask.cells[i]) s += std::norm(k.data[i] - p_.y.data[i]);
    }
    return 0.5 * s;
  }

  Tensor grad(const Tensor& x) const override {
    require_shape(x, shape(), "mri grad");
    ComplexImage k = dft2(to_complex(x));
    for (std::size_t i = 0; i < k.size(); ++i) {
      k.data[i] = p_.mask.cells[i] ? k.data[i] - p_.y.data[i] : 0.0;
    }
    return to_tensor(idft2(k));
  }

  // Diagonal in k-space: (F z + alpha M y) / (1 + alpha M).
  Tensor prox(double alpha, const Tensor& z) const override {
    if (alpha < 0.0) throw DomainError("mri prox: alpha must be nonnegative");
    require_shape(z, shape(), "mri prox");
    ComplexImage k = dft2(to_complex(z));
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (p_.mask.cells[i]) k.data[i] = (k.data[i] + alpha * p_.y.data[i]) / (1.0 + alpha);
    }
    return to_tensor(idft2(k));
  }

  std::optional<double> mu() const override { return full_ ? 1.0 : 0.0; }
  std::optional<double> lip_grad() const override { return 1.0; }

 private:
  MriProblem p_;
  bool full_ = false;
};

}  // namespace

FidelityPtr quadratic_model(Tensor b) { return std::make_shared<QuadraticModel>(std::move(b)); }
FidelityPtr poisson_model(Tensor counts) { return std::make_shared<PoissonModel>(std::move(counts)); }
FidelityPtr qis_model(QisObservation obs) { return std::make_shared<QisModel>(std::move(obs)); }
FidelityPtr mri_model(MriProblem problem) { return std::make_shared<MriModel>(std::move(problem)); }

void QisObservation::validate() const {
  if (ones.size() != shape.size()) throw ShapeError("QisObservation: ones count length does not match shape");
  if (!(sensor_gain > 0.0)) throw DomainError("QisObservation: sensor gain must be positive");
  if (oversample == 0) throw DomainError("QisObservation: oversample must be positive");
  for (auto k1 : ones) {
    if (k1 > oversample) throw DomainError("QisObservation: ones count exceeds oversampling factor");
  }
}

QisObservation simulate_qis(const Tensor& x_true, double sensor_gain, std::uint32_t oversample, Rng& rng) {
  QisObservation obs;
  obs.shape = x_true.shape();
  obs.sensor_gain = sensor_gain;
  obs.oversample = oversample;
  obs.ones.resize(x_true.size());
  const double beta = sensor_gain / oversample;
  for (std::size_t j = 0; j < x_true.size(); ++j) {
    const double p_one = -std::expm1(-beta * std::max(0.0, x_true[j]));
    std::uint32_t k1 = 0;
    for (std::uint32_t i = 0; i < oversample; ++i) k1 += rng.uniform() < p_one ? 1u : 0u;
    obs.ones[j] = k1;
  }
  obs.validate();
  return obs;
}

void MriProblem::validate() const {
  if (mask.height != y.height || mask.width != y.width || mask.cells.size() != y.size()) {
    throw ShapeError("MriProblem: mask and k-space shapes differ");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!mask.cells[i] && y.data[i] != std::complex<double>(0.0, 0.0)) {
      throw DomainError("MriProblem: measurement nonzero off the sampling mask");
    }
  }
  if (!y.all_finite()) throw DomainError("MriProblem: non-finite measurement");
}

MriProblem simulate_mri(const Tensor& x_true, Mask mask, double noise_sigma, Rng& rng) {
  if (mask.height != x_true.height() || mask.width != x_true.width()) {
    throw ShapeError("simulate_mri: mask does not match image");
  }
  MriProblem p;
  p.y = dft2(to_complex(x_true));
  for (std::size_t i = 0; i < p.y.size(); ++i) {
    if (mask.cells[i]) {
      const double re = rng.normal(), im = rng.normal();
      p.y.data[i] += noise_sigma * std::complex<double>(re, im);
    } else {
      p.y.data[i] = 0.0;
    }
  }
  p.mask = std::move(mask);
  p.noise_sigma = noise_sigma;
  return p;
}

Tensor zero_filled(const MriProblem& problem) { return to_tensor(idft2(problem.y)); }

Mask random_mask(std::size_t height, std::size_t width, double rate, RngSeed seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw DomainError("random_mask: rate must lie in (0, 1]");
  const std::size_t cells = height * width;
  Mask m(height, width);
  if (cells == 0) return m;
  const auto target = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(rate * cells)), 1, cells);
  // Partial Fisher-Yates over the non-DC cells.
  std::vector<std::size_t> idx(cells - 1);
  std::iota(idx.begin(), idx.end(), std::size_t{1});
  Rng rng(seed);
  m.cells[0] = 1;
  for (std::size_t i = 0; i + 1 < target; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
    m.cells[idx[i]] = 1;
  }
  return m;
}

namespace scalar {

double poisson_prox(double alpha, double z, double y) {
  const double a = z - alpha;
  const double root = std::sqrt(a * a + 4.0 * alpha * y);
  // Rationalised branch avoids cancellation when z - alpha is negative.
  return a >= 0.0 ? 0.5 * (a + root) : (y > 0.0 ? 2.0 * alpha * y / (root - a) : 0.0);
}

double qis_value(double x, double k0, double k1, double beta) {
  if (x < 0.0 || (x == 0.0 && k1 > 0.0)) return kInf;
  double v = k0 * beta * x;
  if (k1 > 0.0) v -= k1 * std::log(-std::expm1(-beta * x));
  return v;
}

double qis_derivative(double x, double k0, double k1, double beta) {
  if (x < 0.0 || (x == 0.0 && k1 > 0.0)) throw DomainError("qis grad: intensity outside the domain");
  if (k1 == 0.0) return beta * k0;
  return beta * (k0 - k1 / std::expm1(beta * x));
}

double qis_prox(double alpha, double z, double k0, double k1, double beta) {
  if (k1 == 0.0) return std::max(0.0, z - alpha * beta * k0);

  // g is strictly increasing on (0, inf), -inf at 0+, +inf at infinity.
  auto g = [&](double x) { return alpha * beta * (k0 - k1 / std::expm1(beta * x)) + x - z; };
  auto dg = [&](double x) {
    const double t = beta * x;
    return 1.0 + alpha * k1 * beta * beta / (std::expm1(t) * -std::expm1(-t));
  };

  double hi = std::max(z, 0.0) + alpha * beta * k0 + 1.0;
  for (int i = 0; g(hi) <= 0.0; ++i) {
    if (i > 200) throw NumericalError("qis prox: failed to bracket root from above");
    hi *= 2.0;
  }
  double lo = hi;
  for (int i = 0; g(lo) >= 0.0; ++i) {
    if (i > 2000) throw NumericalError("qis prox: failed to bracket root from below");
    lo *= 0.5;
  }

  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    if (gx < 0.0) lo = x; else hi = x;
    const double newton = x - gx / dg(x);
    const bool inside = newton > lo && newton < hi;
    // A small accepted Newton step leaves an error quadratic in its size.
    if (inside && std::abs(newton - x) <= 1e-12 * std::max(1.0, x)) return newton;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, hi)) return 0.5 * (lo + hi);
    x = inside ? newton : 0.5 * (lo + hi);
  }
  throw NumericalError("qis prox: Newton iteration did not converge in 100 steps");
}

}  // namespace scalar

}  // namespace pnp
