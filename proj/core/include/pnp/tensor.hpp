#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace pnp {

// Extent of a (channels, height, width) image.
struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return channels * height * width; }
  std::size_t plane() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Real (c,h,w) image stored row-major: index = (c*height + h)*width + w.
//
// Constructors that accept data reject non-finite entries. Mutating access
// does not re-check; engines call all_finite() on their iterates.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }

  double& operator()(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_.height + h) * shape_.width + w];
  }
  double operator()(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_.height + h) * shape_.width + w];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);
  // this += s * other
  Tensor& axpy(double s, const Tensor& other);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);
Tensor operator*(Tensor a, double s);

// Throws ShapeError unless both shapes match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

double inner(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
// norm2(a - b) without the temporary.
double distance(const Tensor& a, const Tensor& b);

// Largest value psnr() returns; exact matches are reported at this cap.
inline constexpr double kPsnrCap = 200.0;

// 10 log10(peak^2 / MSE) in dB, capped at kPsnrCap.
double psnr(const Tensor& x, const Tensor& ref, double peak);

// Complex (height, width) grid used for k-space data and complex images.
struct ComplexImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::complex<double>> data;

  ComplexImage() = default;
  ComplexImage(std::size_t h, std::size_t w)
      : height(h), width(w), data(h * w) {}

  std::complex<double>& operator()(std::size_t r, std::size_t c) { return data[r * width + c]; }
  std::complex<double> operator()(std::size_t r, std::size_t c) const { return data[r * width + c]; }
  std::size_t size() const { return data.size(); }
  bool all_finite() const;
};

// Two-channel real view of a complex image: channel 0 real, channel 1 imaginary.
Tensor to_tensor(const ComplexImage& z);
// Inverse of to_tensor; a one-channel tensor is read as purely real.
ComplexImage to_complex(const Tensor& t);

}  // namespace pnp
