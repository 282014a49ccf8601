#include <benchmark/benchmark.h>

#include <random>

#include "olinear/linalg.hpp"
#include "olinear/model.hpp"
#include "olinear/transform.hpp"

using namespace olinear;

namespace {

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix a(n, n);
  for (double& v : a.values()) v = z(gen);
  return matmul(a, a.transposed());
}

Tensor3 random_batch(std::size_t b, std::size_t n, std::size_t t, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Tensor3 x(b, n, t);
  for (double& v : x.values()) v = z(gen);
  return x;
}

OLinearConfig bench_config(std::size_t n) {
  OLinearConfig c;
  c.n_variates = n;
  c.lookback = 96;
  c.horizon = 96;
  c.embed_size = 8;
  c.model_dim = 64;
  c.basis_method = BasisMethod::fourier;
  return c;
}

OLinearParams bench_params(const OLinearConfig& c) {
  return init_params(c, build_basis(nullptr, c.basis_method, c.lookback),
                     build_basis(nullptr, c.basis_method, c.horizon), nullptr, 1);
}

}  // namespace

static void BM_SymmetricEigen(benchmark::State& state) {
  const Matrix m = random_symmetric(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(symmetric_eigendecomp(m));
}
BENCHMARK(BM_SymmetricEigen)->Arg(24)->Arg(96)->Arg(192)->Unit(benchmark::kMillisecond);

static void BM_Forward(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  const auto params = bench_params(cfg);
  const Tensor3 x = random_batch(32, cfg.n_variates, cfg.lookback, 3);
  for (auto _ : state) benchmark::DoNotOptimize(predict(x, params, cfg));
}
BENCHMARK(BM_Forward)->Arg(7)->Arg(21)->Unit(benchmark::kMillisecond);

static void BM_ForwardBackward(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)));
  const auto params = bench_params(cfg);
  const Tensor3 x = random_batch(32, cfg.n_variates, cfg.lookback, 3);
  const Tensor3 up = random_batch(32, cfg.n_variates, cfg.horizon, 4);
  for (auto _ : state) {
    auto fwd = forward(x, params, cfg);
    benchmark::DoNotOptimize(backward(fwd.cache, params, up));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(7)->Arg(21)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
