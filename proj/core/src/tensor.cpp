#include "pnp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (!std::isfinite(fill)) throw DomainError("Tensor: non-finite fill value");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                     " does not match shape size " + std::to_string(shape_.size()));
  }
  if (!all_finite()) throw DomainError("Tensor: non-finite entry");
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor& Tensor::axpy(double s, const Tensor& other) {
  require_same_shape(*this, other, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }
Tensor operator*(Tensor a, double s) { return a *= s; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    auto fmt = [](const Shape& s) {
      return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
    };
    throw ShapeError(std::string(what) + ": shape mismatch " + fmt(a.shape()) + " vs " + fmt(b.shape()));
  }
}

double inner(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Tensor& a) {
  // Scaled accumulation keeps tiny iterates (late contraction steps) away from underflow.
  double scale = 0.0;
  for (double v : a.values()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double v : a.values()) {
    const double r = v / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

double distance(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "distance");
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) scale = std::max(scale, std::abs(a[i] - b[i]));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = (a[i] - b[i]) / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

double psnr(const Tensor& x, const Tensor& ref, double peak) {
  require_same_shape(x, ref, "psnr");
  if (!(peak > 0.0)) throw DomainError("psnr: peak must be positive");
  if (x.size() == 0) return kPsnrCap;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

bool ComplexImage::all_finite() const {
  return std::all_of(data.begin(), data.end(),
                     [](const std::complex<double>& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
}

Tensor to_tensor(const ComplexImage& z) {
  Tensor t(Shape{2, z.height, z.width});
  const std::size_t n = z.size();
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = z.data[i].real();
    t[n + i] = z.data[i].imag();
  }
  return t;
}

ComplexImage to_complex(const Tensor& t) {
  if (t.channels() != 1 && t.channels() != 2) {
    throw ShapeError("to_complex: expected 1 or 2 channels, got " + std::to_string(t.channels()));
  }
  ComplexImage z(t.height(), t.width());
  const std::size_t n = z.size();
  for (std::size_t i = 0; i < n; ++i) {
    z.data[i] = {t[i], t.channels() == 2 ? t[n + i] : 0.0};
  }
  return z;
}

}  // namespace pnp
