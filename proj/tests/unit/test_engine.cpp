#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "pnp/cnn.hpp"
#include "pnp/conv.hpp"
#include "pnp/engine.hpp"
#include "pnp/errors.hpp"
#include "pnp/theory.hpp"

using namespace pnp;

namespace {

const Shape kS{1, 6, 6};

// Exact fixed point of FBS with quadratic f and the orthogonal denoiser:
// x = (1-a) x + a b + eps Q((1-a) x + a b), solved by iterating to machine precision.
Tensor fbs_fixed_point(const FidelityModel& f, const Denoiser& d, double alpha, Tensor x) {
  for (int i = 0; i < 2000; ++i) x = fbs_step(f, d, alpha, x);
  return x;
}

SimpleCNNModel small_cnn(std::uint64_t seed) {
  SimpleCNNModel m = make_simple_cnn(CnnShape{1, 3, 4, 3}, NormMode::real_sn, 1.0, RngSeed{seed});
  for (auto& layer : m.layers) layer.kernel = normalize_kernel(layer.kernel, dense_sigma(layer.kernel, 6, 6), 1.0);
  return m;
}

}  // namespace

TEST_CASE("fbs_step examples") {
  Rng rng(RngSeed{1});
  Tensor b = random_normal(kS, rng);
  auto f = quadratic_model(b);
  auto id = identity_denoiser();
  CHECK(testing::max_abs_diff(fbs_step(*f, *id, 1.0, random_normal(kS, rng)), b) < 1e-15);

  auto d = orthogonal_residual_denoiser(0.5);
  Tensor xs = fbs_fixed_point(*f, *d, 0.5, Tensor(kS));
  CHECK(testing::max_abs_diff(fbs_step(*f, *d, 0.5, xs), xs) < 1e-12);

  for (int t = 0; t < 100; ++t) {
    Tensor x1 = random_normal(kS, rng), x2 = random_normal(kS, rng);
    CHECK(distance(fbs_step(*f, *d, 0.5, x1), fbs_step(*f, *d, 0.5, x2)) <= 0.75 * distance(x1, x2) * (1 + 1e-12));
  }
  auto pf = poisson_model(Tensor(kS, 1.0));
  CHECK_THROWS_AS(fbs_step(*pf, *id, 0.1, Tensor(kS, -1.0)), DomainError);
}

TEST_CASE("admm_step examples") {
  Rng rng(RngSeed{2});
  auto f = quadratic_model(random_normal(kS, rng));
  auto d = orthogonal_residual_denoiser(0.5);
  AdmmState s{random_normal(kS, rng), random_normal(kS, rng), random_normal(kS, rng)};
  for (int i = 0; i < 3000; ++i) s = admm_step(*f, *d, 1.0, s);
  AdmmState n = admm_step(*f, *d, 1.0, s);
  CHECK(testing::max_abs_diff(n.x, s.x) < 1e-12);
  CHECK(testing::max_abs_diff(n.y, s.y) < 1e-12);
  CHECK(testing::max_abs_diff(n.u, s.u) < 1e-12);
  CHECK(testing::max_abs_diff(s.x, s.y) < 1e-12);

  AdmmState a{Tensor(kS), random_normal(kS, rng), random_normal(kS, rng)};
  AdmmState b = admm_step(*f, *d, 0.7, a);
  CHECK(testing::max_abs_diff(b.x - b.y, b.u - a.u) < 1e-14);
}

TEST_CASE("drs_step examples") {
  Rng rng(RngSeed{3});
  Tensor bvec = random_normal(kS, rng);
  auto f = quadratic_model(bvec);
  auto id = identity_denoiser();
  Tensor z = random_normal(kS, rng);
  for (int i = 0; i < 200; ++i) z = drs_step(*f, *id, 1.0, z);
  CHECK(testing::max_abs_diff(f->prox(1.0, z), bvec) < 1e-12);

  auto d = orthogonal_residual_denoiser(0.5);
  Tensor zs = random_normal(kS, rng);
  for (int i = 0; i < 500; ++i) zs = drs_step(*f, *d, 2.0, zs);
  CHECK(testing::max_abs_diff(drs_step(*f, *d, 2.0, zs), zs) < 1e-12);

  for (int t = 0; t < 100; ++t) {
    Tensor z1 = random_normal(kS, rng), z2 = random_normal(kS, rng);
    CHECK(distance(drs_step(*f, *d, 2.0, z1), drs_step(*f, *d, 2.0, z2)) <= 0.7 * distance(z1, z2) * (1 + 1e-12));
    CHECK(testing::max_abs_diff(drs_step(*f, *d, 2.0, z1), drs_operator(*f, *d, 2.0, z1)) < 1e-12);
  }
}

TEST_CASE("admm_to_drs examples") {
  Rng rng(RngSeed{4});
  Tensor y = random_normal(kS, rng);
  CHECK(admm_to_drs(AdmmState{Tensor(kS), y, Tensor(kS)}) == y);

  auto f = quadratic_model(random_normal(kS, rng));
  auto d = orthogonal_residual_denoiser(0.5);
  // Any state reached by one ADMM step.
  AdmmState s = admm_step(*f, *d, 0.8, AdmmState{Tensor(kS), random_normal(kS, rng), random_normal(kS, rng)});
  for (int k = 0; k < 20; ++k) {
    const Tensor z = admm_to_drs(s);
    s = admm_step(*f, *d, 0.8, s);
    CHECK(testing::max_abs_diff(drs_step(*f, *d, 0.8, z), admm_to_drs(s)) < 1e-12);
  }

  // Fixed points map to fixed points.
  for (int i = 0; i < 2000; ++i) s = admm_step(*f, *d, 0.8, s);
  const Tensor zs = admm_to_drs(s);
  CHECK(testing::max_abs_diff(drs_step(*f, *d, 0.8, zs), zs) < 1e-12);
  // In the mapped labeling the DRS half step reproduces y and the image iterate x.
  CHECK(testing::max_abs_diff(f->prox(0.8, zs), s.y) < 1e-12);
}

TEST_CASE("admm and drs traces agree under the map for 100 iterations") {
  Rng rng(RngSeed{5});
  auto f = quadratic_model(random_normal(kS, rng));
  for (const DenoiserPtr& d : {orthogonal_residual_denoiser(0.5), cnn_denoiser(small_cnn(6))}) {
    AdmmState s = admm_step(*f, *d, 0.3, AdmmState{Tensor(kS), random_uniform(kS, rng), Tensor(kS)});
    Tensor z = admm_to_drs(s);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      s = admm_step(*f, *d, 0.3, s);
      z = drs_step(*f, *d, 0.3, z);
      worst = std::max(worst, testing::max_abs_diff(z, admm_to_drs(s)));
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("run converges geometrically on the quadratic test bed") {
  Rng rng(RngSeed{7});
  auto f = quadratic_model(Tensor(kS));  // fixed point 0
  auto d = orthogonal_residual_denoiser(0.5);
  PnPConfig cfg;
  cfg.method = Method::FBS;
  cfg.alpha = 0.5;
  cfg.max_iter = 200;
  cfg.tol = 1e-300;
  const Tensor x0 = random_normal(kS, rng);
  IterTrace tr = run(*f, *d, cfg, x0);
  REQUIRE(tr.rows.size() == 200);
  const double d0 = norm2(x0);
  for (std::size_t k = 0; k < tr.iterates.size(); ++k) {
    const double bound = std::pow(0.75, static_cast<double>(k + 1)) * d0 * (1 + 1e-9);
    CHECK(norm2(tr.iterates[k]) <= bound);
  }
  CHECK_FALSE(tr.rows[0].ratio.has_value());
  for (std::size_t k = 1; k < tr.rows.size(); ++k) {
    REQUIRE(tr.rows[k].ratio.has_value());
    CHECK(*tr.rows[k].ratio <= 0.75 + 1e-9);
  }
  CHECK(tr.status == RunStatus::max_iter);
}

TEST_CASE("run stops at the tolerance and starts at fixed points") {
  Rng rng(RngSeed{8});
  auto f = quadratic_model(random_normal(kS, rng));
  auto d = orthogonal_residual_denoiser(0.5);
  for (Method m : {Method::FBS, Method::ADMM, Method::DRS}) {
    PnPConfig cfg;
    cfg.method = m;
    cfg.alpha = m == Method::FBS ? 0.5 : 2.0;
    cfg.tol = 1e-10;
    cfg.max_iter = 500;
    IterTrace tr = run(*f, *d, cfg, random_normal(kS, rng));
    INFO(to_string(m));
    REQUIRE(tr.converged());
    CHECK(tr.iterations < 100);
    CHECK(tr.final_residual() <= 1e-10);
    if (m == Method::FBS) {
      CHECK(distance(tr.final_iterate, fbs_step(*f, *d, cfg.alpha, tr.final_iterate)) <= 2 * cfg.tol);
      IterTrace again = run(*f, *d, cfg, tr.final_iterate);
      CHECK(again.converged());
      CHECK(again.iterations == 1);
    }
    if (m == Method::ADMM) {
      REQUIRE(tr.final_admm.has_value());
      const auto& s = *tr.final_admm;
      CHECK(distance(s.x, d->apply(s.x - s.u)) <= 2 * cfg.tol);
      CHECK(distance(s.x, f->prox(cfg.alpha, s.x + s.u)) <= 2 * cfg.tol);
      CHECK_FALSE(tr.rows[1].ratio.has_value());
      CHECK(tr.rows[2].ratio.has_value());
    }
  }
}

TEST_CASE("run records iterates, psnr and honours record_every") {
  Rng rng(RngSeed{9});
  Tensor gt = random_uniform(kS, rng);
  auto f = quadratic_model(gt);
  PnPConfig cfg;
  cfg.method = Method::DRS;
  cfg.alpha = 1.0;
  cfg.max_iter = 40;
  cfg.tol = 1e-300;
  cfg.record_every = 7;
  IterTrace tr = run(*f, *orthogonal_residual_denoiser(0.2), cfg, Tensor(kS), gt);
  CHECK(tr.rows.size() == 6);  // 7, 14, ..., 35 and the last step
  CHECK(tr.rows.back().iteration == 40);
  CHECK(tr.iterates.size() == tr.rows.size());
  for (const auto& r : tr.rows) {
    CHECK(r.psnr.has_value());
    CHECK(r.ratio.has_value());
  }
  cfg.keep_iterates = false;
  CHECK(run(*f, *identity_denoiser(), cfg, Tensor(kS)).iterates.empty());
}

TEST_CASE("run fails cleanly on domain errors and non-finite iterates") {
  auto pf = poisson_model(Tensor(kS, 2.0));
  PnPConfig cfg;
  cfg.method = Method::FBS;
  cfg.alpha = 10.0;
  // The reflected step drives the iterate negative, where the gradient is undefined.
  IterTrace tr = run(*pf, *identity_denoiser(), cfg, Tensor(kS, 0.05));
  CHECK(tr.status == RunStatus::failed);
  CHECK_FALSE(tr.message.empty());
  CHECK(tr.final_iterate.all_finite());

  auto f = quadratic_model(Tensor(kS));
  cfg.alpha = 0.5;
  cfg.max_iter = 5000;
  IterTrace blow = run(*f, *orthogonal_residual_denoiser(1e300), cfg, Tensor(kS, 1.0));
  CHECK(blow.status == RunStatus::failed);
  CHECK(blow.message.find("non-finite") != std::string::npos);
  CHECK_FALSE(blow.rows.empty());

  cfg.alpha = 0.0;
  CHECK_THROWS_AS(run(*f, *identity_denoiser(), cfg, Tensor(kS)), DomainError);
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(run(*f, *identity_denoiser(), cfg, Tensor(Shape{1, 2, 2})), ShapeError);
}
