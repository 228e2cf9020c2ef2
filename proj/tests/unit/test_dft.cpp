#include <cmath>
#include <complex>

#include "doctest.h"
#include "pnp/dft.hpp"
#include "pnp/oracle.hpp"
#include "pnp/rng.hpp"

using namespace pnp;

namespace {

ComplexImage random_complex(std::size_t h, std::size_t w, Rng& rng) {
  ComplexImage z(h, w);
  for (auto& v : z.data) v = {rng.normal(), rng.normal()};
  return z;
}

double max_diff(const ComplexImage& a, const ComplexImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double energy(const ComplexImage& a) {
  double s = 0.0;
  for (auto v : a.data) s += std::norm(v);
  return s;
}

}  // namespace

TEST_CASE("dft2 matches the direct sum") {
  Rng rng(RngSeed{21});
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {5, 7}, {1, 6}, {16, 3}}) {
    ComplexImage x = random_complex(h, w, rng);
    CHECK(max_diff(dft2(x), oracle::naive_dft2(x)) < 1e-12);
    CHECK(max_diff(idft2(x), oracle::naive_idft2(x)) < 1e-12);
  }
}

TEST_CASE("dft2 is unitary") {
  Rng rng(RngSeed{22});
  ComplexImage x = random_complex(12, 10, rng);
  ComplexImage k = dft2(x);
  CHECK(std::abs(energy(k) - energy(x)) < 1e-10 * energy(x));
  CHECK(max_diff(idft2(k), x) < 1e-13);
}

TEST_CASE("dft2 of a delta is flat") {
  ComplexImage d(4, 4);
  d(0, 0) = 1.0;
  ComplexImage k = dft2(d);
  for (auto v : k.data) CHECK(std::abs(v - std::complex<double>(0.25, 0.0)) < 1e-15);
}
