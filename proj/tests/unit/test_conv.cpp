#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pnp/conv.hpp"
#include "pnp/errors.hpp"
#include "pnp/oracle.hpp"

using namespace pnp;

namespace {

ConvKernel random_kernel(std::size_t co, std::size_t ci, std::size_t k, Rng& rng) {
  ConvKernel out(co, ci, k, k);
  for (auto& w : out.weights()) w = rng.normal();
  return out;
}

ConvKernel box(double v = 1.0 / 9.0) { return ConvKernel(1, 1, 3, 3, std::vector<double>(9, v)); }

ConvKernel scalar_kernel(double v) { return ConvKernel(1, 1, 1, 1, {v}); }

double converge_power(const ConvKernel& k, std::size_t h, std::size_t w, std::size_t steps, RngSeed seed) {
  PowerIterState s = init_power_state(k, h, w, seed);
  for (std::size_t i = 0; i < steps; ++i) s = power_step(k, s);
  return sigma_from_state(k, s).sigma;
}

}  // namespace

TEST_CASE("conv_forward examples") {
  Rng rng(RngSeed{1});
  Tensor x = random_normal(Shape{1, 6, 5}, rng);
  CHECK(testing::max_abs_diff(conv_forward(scalar_kernel(2.0), x), 2.0 * x) == 0.0);

  ConvKernel delta(1, 1, 3, 3);
  delta(0, 0, 1, 1) = 1.0;
  CHECK(testing::max_abs_diff(conv_forward(delta, x), x) == 0.0);

  Tensor ones(Shape{1, 8, 8}, 1.0);
  Tensor y = conv_forward(box(), ones);
  for (std::size_t r = 1; r < 7; ++r)
    for (std::size_t c = 1; c < 7; ++c) CHECK(y(0, r, c) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(y(0, 0, 0) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  CHECK(y(0, 7, 7) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  CHECK(y(0, 0, 3) == doctest::Approx(6.0 / 9.0).epsilon(1e-15));

  CHECK_THROWS_AS(conv_forward(box(), Tensor(Shape{2, 4, 4})), ShapeError);
  CHECK_THROWS(ConvKernel(1, 1, 2, 3));
}

TEST_CASE("conv_forward matches the index definition") {
  Rng rng(RngSeed{2});
  for (int t = 0; t < 10; ++t) {
    ConvKernel k = random_kernel(3, 2, t % 2 ? 5 : 3, rng);
    Tensor x = random_normal(Shape{2, 7, 6}, rng);
    CHECK(testing::max_abs_diff(conv_forward(k, x), oracle::naive_conv(k, x)) < 1e-12);
  }
}

TEST_CASE("adjoint identity") {
  Rng rng(RngSeed{3});
  for (int t = 0; t < 100; ++t) {
    const std::size_t co = 1 + rng.below(3), ci = 1 + rng.below(3);
    ConvKernel k = random_kernel(co, ci, 3, rng);
    Tensor x = random_normal(Shape{ci, 8, 8}, rng), u = random_normal(Shape{co, 8, 8}, rng);
    const double lhs = inner(conv_forward(k, x), u), rhs = inner(x, conv_adjoint(k, u));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + norm2(x) * norm2(u)));
  }
}

TEST_CASE("adjoint kernel layout and symmetric cases") {
  Rng rng(RngSeed{4});
  ConvKernel k = random_kernel(2, 3, 3, rng);
  ConvKernel a = adjoint_kernel(k);
  CHECK(a.c_out() == 3);
  CHECK(a.c_in() == 2);
  CHECK(a(2, 1, 0, 2) == k(1, 2, 2, 0));
  Tensor u = random_normal(Shape{1, 6, 6}, rng);
  CHECK(testing::max_abs_diff(conv_adjoint(box(), u), conv_forward(box(), u)) == 0.0);
  CHECK(testing::max_abs_diff(conv_adjoint(scalar_kernel(2.0), u), 2.0 * u) == 0.0);
  // Adjoint matrix equals the transpose of the forward matrix.
  const Eigen::MatrixXd fwd = oracle::conv_matrix(k, 4, 5), adj = oracle::conv_matrix(a, 4, 5);
  CHECK((fwd.transpose() - adj).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("power_step examples") {
  auto two = scalar_kernel(2.0);
  PowerIterState s = init_power_state(two, 4, 4, RngSeed{5});
  s = power_step(two, s);
  CHECK(norm2(s.u) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(norm2(s.v) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sigma_from_state(two, s).sigma == doctest::Approx(2.0).epsilon(1e-12));

  Rng rng(RngSeed{6});
  ConvKernel k = random_kernel(2, 2, 3, rng);
  PowerIterState p = init_power_state(k, 8, 8, RngSeed{7});
  for (int i = 0; i < 3000; ++i) p = power_step(k, p);
  PowerIterState q = power_step(k, p);
  CHECK(distance(p.u, q.u) < 1e-12);
  CHECK(distance(p.v, q.v) < 1e-12);
}

TEST_CASE("power_step reinitialises a vanishing vector") {
  ConvKernel zero(1, 1, 3, 3);
  PowerIterState s = init_power_state(zero, 4, 4, RngSeed{8});
  PowerIterState n = power_step(zero, s);
  CHECK(n.reinitialized_last_step);
  CHECK(n.reinitializations == 2);
  CHECK(norm2(n.u) == doctest::Approx(1.0));
  CHECK(norm2(n.v) == doctest::Approx(1.0));
  PowerIterState n2 = power_step(zero, s);
  CHECK(n2.u == n.u);  // reseeding is deterministic
}

TEST_CASE("power iteration converges to the dense sigma") {
  Rng rng(RngSeed{9});
  for (int t = 0; t < 10; ++t) {
    ConvKernel k = random_kernel(2, 2, 3, rng);
    const double dense = dense_sigma(k, 8, 8).sigma;
    CHECK(std::abs(converge_power(k, 8, 8, 500, RngSeed{100u + t}) - dense) <= 1e-3 * dense);
  }
}

TEST_CASE("rayleigh estimate improves monotonically") {
  Rng rng(RngSeed{10});
  ConvKernel k = random_kernel(3, 2, 3, rng);
  PowerIterState s = power_step(k, init_power_state(k, 6, 6, RngSeed{11}));
  double last = sigma_from_state(k, s).sigma;
  CHECK(last >= 0.0);
  for (int i = 0; i < 200; ++i) {
    s = power_step(k, s);
    const double cur = sigma_from_state(k, s).sigma;
    CHECK(cur >= last - 1e-12);
    last = cur;
  }
}

TEST_CASE("sigma examples") {
  CHECK(dense_sigma(scalar_kernel(-3.0), 4, 4).sigma == doctest::Approx(3.0).epsilon(1e-12));
  ConvKernel delta(1, 1, 3, 3);
  delta(0, 0, 1, 1) = 1.0;
  CHECK(dense_sigma(delta, 5, 5).sigma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(converge_power(scalar_kernel(-3.0), 4, 4, 2, RngSeed{1}) == doctest::Approx(3.0).epsilon(1e-12));

  const double box_sigma = dense_sigma(box(), 8, 8).sigma;
  CHECK(box_sigma < 1.0);
  CHECK(box_sigma > 0.9);
  CHECK(std::abs(converge_power(box(), 8, 8, 500, RngSeed{2}) - box_sigma) < 1e-3);
  CHECK(std::abs(box_sigma - oracle::svd_sigma(box(), 8, 8)) < 1e-10);
}

TEST_CASE("dense sigma agrees with a full SVD and enforces the guard") {
  Rng rng(RngSeed{12});
  for (int t = 0; t < 10; ++t) {
    ConvKernel k = random_kernel(1 + rng.below(3), 1 + rng.below(3), 3, rng);
    CHECK(dense_sigma(k, 6, 6).sigma == doctest::Approx(oracle::svd_sigma(k, 6, 6)).epsilon(1e-10));
  }
  ConvKernel wide(2, 2, 3, 3);
  CHECK_NOTHROW(dense_sigma(wide, 32, 64));
  CHECK_THROWS_AS(dense_sigma(wide, 33, 64), DomainError);
  CHECK(dense_sigma(box(), 8, 8).method == SigmaMethod::dense_svd);
}

TEST_CASE("dense sigma is invariant under permuting the input basis") {
  Rng rng(RngSeed{13});
  ConvKernel k = random_kernel(2, 2, 3, rng);
  Eigen::MatrixXd m = oracle::conv_matrix(k, 5, 5);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(static_cast<int>(m.cols()));
  perm.setIdentity();
  for (int i = static_cast<int>(m.cols()) - 1; i > 0; --i) std::swap(perm.indices()[i], perm.indices()[rng.below(i + 1)]);
  Eigen::JacobiSVD<Eigen::MatrixXd> a(m), b(m * perm);
  CHECK(a.singularValues()(0) == doctest::Approx(b.singularValues()(0)).epsilon(1e-12));
  CHECK(a.singularValues()(0) == doctest::Approx(dense_sigma(k, 5, 5).sigma).epsilon(1e-10));
}

TEST_CASE("normalize_kernel examples") {
  Rng rng(RngSeed{14});
  ConvKernel k = random_kernel(2, 2, 3, rng);
  ConvKernel half = normalize_kernel(k, SigmaEstimate{2.0, 1, SigmaMethod::power_conv}, 1.0);
  for (std::size_t i = 0; i < k.size(); ++i) CHECK(half.weights()[i] == 0.5 * k.weights()[i]);
  ConvKernel same = normalize_kernel(k, SigmaEstimate{1.5, 1, SigmaMethod::power_conv}, 1.5);
  for (std::size_t i = 0; i < k.size(); ++i) CHECK(std::abs(same.weights()[i] - k.weights()[i]) < 1e-12);
  for (double c : {0.5, 1.0, 2.0}) {
    ConvKernel n = normalize_kernel(k, dense_sigma(k, 8, 8), c);
    CHECK(std::abs(dense_sigma(n, 8, 8).sigma - c) < 1e-9);
  }
  CHECK_THROWS_AS(normalize_kernel(k, SigmaEstimate{0.0, 1, SigmaMethod::power_conv}, 1.0), DomainError);
  ConvKernel kept = normalize_kernel(k, SigmaEstimate{0.5, 1, SigmaMethod::power_conv}, 1.0, true);
  CHECK(kept == k);
}

TEST_CASE("reshape SN examples") {
  CHECK(reshape_sn_sigma(box()).sigma == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  Rng rng(RngSeed{15});
  for (int t = 0; t < 5; ++t) {
    ConvKernel k = random_kernel(3, 2, 1, rng);
    CHECK(reshape_sn_sigma(k).sigma == doctest::Approx(dense_sigma(k, 4, 4).sigma).epsilon(1e-9));
  }
  for (int t = 0; t < 100; ++t) {
    ConvKernel k = random_kernel(2, 2, 3, rng);
    CHECK(reshape_sn_sigma(k).sigma <= dense_sigma(k, 8, 8).sigma + 1e-9);
  }
}

TEST_CASE("reshape power step tracks the reshaped matrix norm") {
  Rng rng(RngSeed{16});
  ConvKernel k = random_kernel(3, 2, 3, rng);
  ReshapePowerState s = init_reshape_state(k, RngSeed{17});
  double est = 0.0;
  for (int i = 0; i < 2000; ++i) std::tie(s, est) = reshape_power_step(k, s);
  CHECK(est == doctest::Approx(reshape_sn_sigma(k).sigma).epsilon(1e-9));
}

TEST_CASE("sigma estimators are scale equivariant") {
  Rng rng(RngSeed{18});
  ConvKernel k = random_kernel(2, 3, 3, rng);
  const double d = dense_sigma(k, 6, 6).sigma, r = reshape_sn_sigma(k).sigma;
  const double p = converge_power(k, 6, 6, 2000, RngSeed{19});
  for (double c : {-2.5, 0.1, 7.0}) {
    ConvKernel ck = k.scaled(c);
    CHECK(dense_sigma(ck, 6, 6).sigma == doctest::Approx(std::abs(c) * d).epsilon(1e-10));
    CHECK(reshape_sn_sigma(ck).sigma == doctest::Approx(std::abs(c) * r).epsilon(1e-9));
    CHECK(converge_power(ck, 6, 6, 2000, RngSeed{19}) == doctest::Approx(std::abs(c) * p).epsilon(1e-9));
  }
}

TEST_CASE("kernel file round-trip") {
  Rng rng(RngSeed{20});
  ConvKernel k = random_kernel(3, 2, 5, rng);
  std::stringstream ss;
  write_kernel(ss, k);
  CHECK(ss.str().rfind("PNPK 3 2 5 5\n", 0) == 0);
  CHECK(read_kernel(ss) == k);
  std::stringstream even("PNPK 1 1 2 2\n");
  CHECK_THROWS_AS(read_kernel(even), FormatError);
}
