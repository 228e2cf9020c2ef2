#include "pnp/dft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace pnp {

namespace {

using cplx = std::complex<double>;

std::vector<cplx> twiddles(std::size_t n, double sign) {
  std::vector<cplx> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    t[k] = {std::cos(a), std::sin(a)};
  }
  return t;
}

// Separable transform: rows, then columns. Exponents are reduced mod n so the
// table lookup stays exact.
ComplexImage transform(const ComplexImage& in, double sign) {
  const std::size_t h = in.height, w = in.width;
  ComplexImage tmp(h, w), out(h, w);
  const auto tw_w = twiddles(w, sign);
  const auto tw_h = twiddles(h, sign);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t k = 0; k < w; ++k) {
      cplx s = 0.0;
      for (std::size_t c = 0; c < w; ++c) s += in(r, c) * tw_w[(k * c) % w];
      tmp(r, k) = s;
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (std::size_t k = 0; k < w; ++k) {
    for (std::size_t q = 0; q < h; ++q) {
      cplx s = 0.0;
      for (std::size_t r = 0; r < h; ++r) s += tmp(r, k) * tw_h[(q * r) % h];
      out(q, k) = s * scale;
    }
  }
  return out;
}

}  // namespace

ComplexImage dft2(const ComplexImage& x) { return transform(x, -1.0); }
ComplexImage idft2(const ComplexImage& k) { return transform(k, +1.0); }

}  // namespace pnp
