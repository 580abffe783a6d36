#include "rwmlab/diffusion.hpp"
#include "rwmlab/linalg.hpp"
#include "rwmlab/normal.hpp"
#include "rwmlab/rwm.hpp"
#include "rwmlab/targets.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace rwmlab;

void BM_RwmStep(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const RwmConfig cfg(BlockProductTarget(make_standard_normal(2), d), SpdMatrix::identity(2), 2.38 / std::sqrt(2.0), 1,
                      1.0, 1.0);
  RngStream rng(1, 0);
  Vector x = cfg.target.sample(rng);
  for (auto _ : state) {
    StepResult r = rwm_step(x, cfg, rng);
    x.swap(r.state);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * d);
}
BENCHMARK(BM_RwmStep)->Arg(10)->Arg(100)->Arg(1000);

void BM_ContinuousChain(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const RwmConfig cfg(BlockProductTarget(make_logistic_1d(), d), SpdMatrix::identity(1), 2.38 * std::sqrt(3.0), 1,
                      1.0, 0.1);
  std::uint32_t rep = 0;
  for (auto _ : state) {
    RngStream rng(7, stream_id(streams::kRwm, rep++));
    benchmark::DoNotOptimize(run_continuous(cfg, Stationary{}, rng));
  }
}
BENCHMARK(BM_ContinuousChain)->Arg(50)->Arg(200);

void BM_NormalCdf(benchmark::State& state) {
  double x = -6.0, acc = 0.0;
  for (auto _ : state) {
    acc += normal_cdf(x);
    x = x > 6.0 ? -6.0 : x + 1e-3;
  }
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_NormalCdf);

void BM_JacobiEigen(benchmark::State& state) {
  const auto k = static_cast<Eigen::Index>(state.range(0));
  RngStream rng(3, 0);
  Matrix a(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) a(i, j) = rng.normal();
  const Matrix s = a * a.transpose() + Matrix::Identity(k, k);
  for (auto _ : state) benchmark::DoNotOptimize(symmetric_eigen(s));
}
BENCHMARK(BM_JacobiEigen)->Arg(2)->Arg(8)->Arg(32);

void BM_DiffusionPath(benchmark::State& state) {
  const auto r = static_cast<Eigen::Index>(state.range(0));
  const DiffusionConfig cfg(make_logistic_1d(), SpdMatrix::identity(1), std::nullopt, r, 1.0, 0.1);
  std::uint32_t rep = 0;
  for (auto _ : state) {
    RngStream rng(11, stream_id(streams::kDiffusion, rep++));
    benchmark::DoNotOptimize(integrate(cfg, Stationary{}, rng));
  }
}
BENCHMARK(BM_DiffusionPath)->Arg(1)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
