// Kernel and sampler throughput. Matrix builders are timed both through the
// OpenMP path and the serial reference; set OMP_NUM_THREADS to compare.

#include <benchmark/benchmark.h>

#include <numeric>

#include "igp/kernel.hpp"
#include "igp/sampler.hpp"
#include "igp/validation.hpp"

namespace {

std::vector<double> spread(std::size_t n, double lo, double hi) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return t;
}

const igp::KernelParams kParams{0.2, 2.0, 4.0};

void BM_RateCovMatrix(benchmark::State& state) {
  const auto grid = igp::Grid::uniform(0.0, 2.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(igp::rate_cov_matrix(kParams, grid, 1e-10));
}
void BM_RateCovMatrixSerial(benchmark::State& state) {
  const auto grid = igp::Grid::uniform(0.0, 2.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(igp::rate_cov_matrix_serial(kParams, grid, 1e-10));
}

void BM_CrossCovMatrix(benchmark::State& state) {
  const auto grid = igp::Grid::uniform(0.0, 2.0, 50);
  const auto quad = igp::QuadratureRule::chebyshev_gauss(igp::kDefaultQuadratureOrder);
  const auto chis = spread(static_cast<std::size_t>(state.range(0)), 0.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(igp::cross_cov_matrix(kParams, chis, grid, quad));
}
void BM_CrossCovMatrixSerial(benchmark::State& state) {
  const auto grid = igp::Grid::uniform(0.0, 2.0, 50);
  const auto quad = igp::QuadratureRule::chebyshev_gauss(igp::kDefaultQuadratureOrder);
  const auto chis = spread(static_cast<std::size_t>(state.range(0)), 0.0, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(igp::cross_cov_matrix_serial(kParams, chis, grid, quad));
}

void BM_CacheEvaluate(benchmark::State& state) {
  const auto grid = igp::Grid::uniform(0.0, 2.0, 50);
  const auto quad = igp::QuadratureRule::chebyshev_gauss(igp::kDefaultQuadratureOrder);
  igp::CrossCovCache cache(grid, quad, 2.0);
  cache.set_times(spread(static_cast<std::size_t>(state.range(0)), 0.0, 2.0));
  double rho = 0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cache.evaluate(rho));
    rho = rho < 0.5 ? rho + 1e-4 : 0.2;
  }
}

void BM_CacheEvaluateRow(benchmark::State& state) {
  const auto grid = igp::Grid::uniform(0.0, 2.0, 50);
  const auto quad = igp::QuadratureRule::chebyshev_gauss(igp::kDefaultQuadratureOrder);
  igp::CrossCovCache cache(grid, quad, 2.0);
  cache.set_times(spread(100, 0.0, 2.0));
  std::size_t row = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cache.evaluate_row(row, 0.2));
    row = (row + 1) % cache.rows();
  }
}

void BM_SamplerSweep(benchmark::State& state) {
  const auto mode = state.range(0) == 0 ? igp::ModelMode::SIGP : igp::ModelMode::EIVIGP;
  igp::Design design;
  design.n_obs = 100;
  design.noise_sd = 0.05;
  design.level_sd = 0.05;
  auto sim = igp::simulate_dataset(1.0, 0.2, design, 11);
  if (mode == igp::ModelMode::EIVIGP)
    for (auto& r : sim.records) r.age_sd = 20.0;
  igp::FitSettings settings;
  settings.mode = mode;
  const auto problem = igp::make_problem(sim.records, igp::GiaAssignment{}, settings);
  igp::Sampler sampler(problem, 3);
  sampler.initialize_from_prior();
  for (int i = 0; i < 50; ++i) sampler.iterate(true);
  for (auto _ : state) sampler.iterate();
  state.SetLabel(igp::to_string(mode));
}

}  // namespace

BENCHMARK(BM_RateCovMatrix)->Arg(30)->Arg(50)->Arg(200);
BENCHMARK(BM_RateCovMatrixSerial)->Arg(30)->Arg(50)->Arg(200);
BENCHMARK(BM_CrossCovMatrix)->Arg(100)->Arg(1000);
BENCHMARK(BM_CrossCovMatrixSerial)->Arg(100)->Arg(1000);
BENCHMARK(BM_CacheEvaluate)->Arg(100)->Arg(1000);
BENCHMARK(BM_CacheEvaluateRow);
BENCHMARK(BM_SamplerSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
