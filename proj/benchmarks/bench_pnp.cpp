#include <benchmark/benchmark.h>

#include "pnp/cnn.hpp"
#include "pnp/conv.hpp"
#include "pnp/denoiser.hpp"
#include "pnp/engine.hpp"
#include "pnp/fidelity.hpp"

using namespace pnp;

namespace {

ConvKernel random_kernel(std::size_t co, std::size_t ci, Rng& rng) {
  ConvKernel k(co, ci, 3, 3);
  for (double& w : k.weights()) w = rng.normal();
  return k;
}

void BM_ConvForward(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Rng rng(RngSeed{1});
  const ConvKernel k = random_kernel(8, 8, rng);
  const Tensor x = random_normal(Shape{8, n, n}, rng);
  for (auto _ : st) benchmark::DoNotOptimize(conv_forward(k, x));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Arg(64);

void BM_PowerStep(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Rng rng(RngSeed{2});
  const ConvKernel k = random_kernel(8, 8, rng);
  PowerIterState s = init_power_state(k, n, n, RngSeed{3});
  for (auto _ : st) {
    s = power_step(k, s);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_PowerStep)->Arg(16)->Arg(32);

void BM_DenseSigma(benchmark::State& st) {
  Rng rng(RngSeed{4});
  const ConvKernel k = random_kernel(2, 2, rng);
  for (auto _ : st) benchmark::DoNotOptimize(dense_sigma(k, 8, 8));
}
BENCHMARK(BM_DenseSigma);

void BM_PoissonProx(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  Rng rng(RngSeed{5});
  Tensor y(Shape{1, n, n});
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = double(rng.poisson(1.0));
  const auto f = poisson_model(y);
  const Tensor z = random_normal(y.shape(), rng);
  for (auto _ : st) benchmark::DoNotOptimize(f->prox(0.1, z));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(z.size()));
}
BENCHMARK(BM_PoissonProx)->Arg(32)->Arg(128);

void BM_QisProx(benchmark::State& st) {
  Rng rng(RngSeed{6});
  const Tensor x = random_uniform(Shape{1, 32, 32}, rng);
  const auto f = qis_model(simulate_qis(x, 8.0, 8, rng));
  const Tensor z = random_uniform(x.shape(), rng);
  for (auto _ : st) benchmark::DoNotOptimize(f->prox(0.2, z));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(z.size()));
}
BENCHMARK(BM_QisProx);

void BM_CnnForward(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const SimpleCNNModel m = make_simple_cnn(CnnShape{}, NormMode::real_sn, 1.0, RngSeed{7});
  Rng rng(RngSeed{8});
  const Tensor y = random_uniform(Shape{1, n, n}, rng);
  for (auto _ : st) benchmark::DoNotOptimize(forward(m, y));
}
BENCHMARK(BM_CnnForward)->Arg(16)->Arg(32)->Arg(64);

void BM_AdmmStepPoissonCnn(benchmark::State& st) {
  Rng rng(RngSeed{9});
  Tensor y(Shape{1, 32, 32});
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = double(rng.poisson(0.5));
  const auto f = poisson_model(y);
  const auto d = cnn_denoiser(make_simple_cnn(CnnShape{}, NormMode::real_sn, 1.0, RngSeed{10}));
  AdmmState s{y, y, Tensor(y.shape())};
  for (auto _ : st) {
    s = admm_step(*f, *d, 0.1, s);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_AdmmStepPoissonCnn);

}  // namespace

BENCHMARK_MAIN();
