#include "pnp/oracle.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "pnp/errors.hpp"

namespace pnp::oracle {

double golden_section(const ObjectiveDiff& diff, double lo, double hi, double tol) {
  if (!(hi > lo)) throw DomainError("golden_section: empty bracket");
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  for (int it = 0; it < 400; ++it) {
    if (b - a <= tol * std::max(1.0, std::abs(0.5 * (a + b)))) break;
    if (diff(c, d) < 0.0) {
      b = d;
      d = c;
      c = b - r * (b - a);
    } else {
      a = c;
      c = d;
      d = a + r * (b - a);
    }
  }
  return 0.5 * (a + b);
}

double poisson_prox(double alpha, double z, double y) {
  // g(x) = alpha (x - y log x) + (x - z)^2 / 2
  auto diff = [=](double a, double b) {
    double v = alpha * (a - b) + 0.5 * (a - b) * (a + b - 2.0 * z);
    if (y > 0.0) v -= alpha * y * std::log1p((a - b) / b);
    return v;
  };
  const double hi = std::abs(z) + alpha + std::sqrt(alpha * y) + y + 1.0;
  return golden_section(diff, 0.0, hi);
}

double qis_prox(double alpha, double z, double k0, double k1, double beta) {
  // g(x) = alpha (k0 beta x - k1 log(1 - e^{-beta x})) + (x - z)^2 / 2
  auto diff = [=](double a, double b) {
    double v = alpha * k0 * beta * (a - b) + 0.5 * (a - b) * (a + b - 2.0 * z);
    if (k1 > 0.0) {
      // log((1 - e^{-beta a}) / (1 - e^{-beta b})) without subtracting nearby logs
      const double q = std::exp(-beta * b) * -std::expm1(-beta * (a - b)) / -std::expm1(-beta * b);
      v -= alpha * k1 * std::log1p(q);
    }
    return v;
  };
  const double hi = std::abs(z) + std::sqrt(alpha * k1) + alpha * k1 + 1.0;
  return golden_section(diff, 0.0, hi);
}

namespace {

ComplexImage naive_transform(const ComplexImage& x, double sign) {
  const std::size_t h = x.height, w = x.width;
  ComplexImage out(h, w);
  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (std::size_t kr = 0; kr < h; ++kr)
    for (std::size_t kc = 0; kc < w; ++kc) {
      std::complex<long double> acc = 0;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          const long double ang = sign * 2.0L * std::numbers::pi_v<long double> *
                                  (static_cast<long double>(kr * r) / h + static_cast<long double>(kc * c) / w);
          acc += std::complex<long double>(x(r, c)) * std::polar(1.0L, ang);
        }
      out(kr, kc) = std::complex<double>(acc) * scale;
    }
  return out;
}

}  // namespace

ComplexImage naive_dft2(const ComplexImage& x) { return naive_transform(x, -1.0); }
ComplexImage naive_idft2(const ComplexImage& k) { return naive_transform(k, 1.0); }

Tensor mri_prox(const MriProblem& p, double alpha, const Tensor& z) {
  const std::size_t h = p.mask.height, w = p.mask.width;
  // A x = x + alpha F* M F x
  auto apply_a = [&](const ComplexImage& x) {
    ComplexImage k = naive_dft2(x);
    for (std::size_t i = 0; i < k.size(); ++i)
      if (!p.mask.cells[i]) k.data[i] = 0.0;
    ComplexImage back = naive_idft2(k);
    ComplexImage out(h, w);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = x.data[i] + alpha * back.data[i];
    return out;
  };
  auto dot = [](const ComplexImage& a, const ComplexImage& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::real(std::conj(a.data[i]) * b.data[i]);
    return s;
  };
  ComplexImage rhs = to_complex(z);
  ComplexImage aty = naive_idft2(p.y);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs.data[i] += alpha * aty.data[i];

  ComplexImage x(h, w), r = rhs, d = rhs;
  double rr = dot(r, r);
  const double stop = 1e-30 * std::max(1.0, rr);
  for (std::size_t it = 0; it < 4 * h * w && rr > stop; ++it) {
    ComplexImage ad = apply_a(d);
    const double step = rr / dot(d, ad);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.data[i] += step * d.data[i];
      r.data[i] -= step * ad.data[i];
    }
    const double rr_new = dot(r, r);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] = r.data[i] + (rr_new / rr) * d.data[i];
    rr = rr_new;
  }
  return to_tensor(x);
}

Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    probe[i] = x[i] + step;
    const double fp = f(probe);
    probe[i] = x[i] - step;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

Eigen::MatrixXd conv_matrix(const ConvKernel& k, std::size_t height, std::size_t width) {
  const long h = static_cast<long>(height), w = static_cast<long>(width);
  const long pr = static_cast<long>(k.kh() / 2), pc = static_cast<long>(k.kw() / 2);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k.c_out() * height * width, k.c_in() * height * width);
  for (std::size_t o = 0; o < k.c_out(); ++o)
    for (long r = 0; r < h; ++r)
      for (long c = 0; c < w; ++c) {
        const long row = (static_cast<long>(o) * h + r) * w + c;
        for (std::size_t i = 0; i < k.c_in(); ++i)
          for (std::size_t a = 0; a < k.kh(); ++a)
            for (std::size_t b = 0; b < k.kw(); ++b) {
              const long rr = r + static_cast<long>(a) - pr, cc = c + static_cast<long>(b) - pc;
              if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
              m(row, (static_cast<long>(i) * h + rr) * w + cc) += k(o, i, a, b);
            }
      }
  return m;
}

double svd_sigma(const ConvKernel& k, std::size_t height, std::size_t width) {
  const Eigen::MatrixXd m = conv_matrix(k, height, width);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

Tensor naive_conv(const ConvKernel& k, const Tensor& x) {
  if (x.channels() != k.c_in()) throw ShapeError("naive_conv: channel mismatch");
  const Eigen::MatrixXd m = conv_matrix(k, x.height(), x.width());
  const Eigen::Map<const Eigen::VectorXd> v(x.raw().data(), static_cast<long>(x.size()));
  const Eigen::VectorXd out = m * v;
  return Tensor(Shape{k.c_out(), x.height(), x.width()}, std::vector<double>(out.data(), out.data() + out.size()));
}

}  // namespace pnp::oracle
