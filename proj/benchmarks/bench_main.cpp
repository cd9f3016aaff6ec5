#include <cmath>

#include <benchmark/benchmark.h>

#include "fpk/coefficients.hpp"
#include "fpk/ensemble.hpp"
#include "fpk/fpke.hpp"
#include "fpk/snse.hpp"

namespace {

void BM_SimulateOu(benchmark::State& state) {
  const auto model = fpk::models::ornstein_uhlenbeck(1.0, std::sqrt(2.0), 1.0);
  fpk::SimulationSpec spec;
  spec.paths = static_cast<std::size_t>(state.range(0));
  spec.steps = 100;
  spec.record_every = 10;
  const fpk::Vector x0 = fpk::Vector::Constant(1, 1.0);
  for (auto _ : state) {
    auto ens = fpk::simulate_em(model, x0, spec);
    benchmark::DoNotOptimize(ens);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 100);
}
BENCHMARK(BM_SimulateOu)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_GridOu(benchmark::State& state) {
  const auto model = fpk::models::ornstein_uhlenbeck(1.0, std::sqrt(2.0), 1.0);
  fpk::GridSpec grid;
  grid.axes = {{-6.0, 7.0, static_cast<std::size_t>(state.range(0))}};
  grid.steps = 1000;
  grid.record_every = 100;
  const fpk::Vector x0 = fpk::Vector::Constant(1, 1.0);
  for (auto _ : state) {
    auto flow = fpk::solve_fpke_grid(model, x0, grid);
    benchmark::DoNotOptimize(flow);
  }
}
BENCHMARK(BM_GridOu)->Arg(325)->Arg(650)->Arg(1300)->Unit(benchmark::kMillisecond);

void BM_SnseDrift(benchmark::State& state) {
  fpk::snse::Config cfg;
  cfg.k_max = static_cast<int>(state.range(0));
  const auto model = fpk::snse::build_coefficients(cfg);
  const fpk::Vector y = fpk::Vector::LinSpaced(static_cast<Eigen::Index>(model.dim()), -1.0, 1.0);
  fpk::Vector out(y.size());
  for (auto _ : state) {
    model.drift(0.0, y, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_SnseDrift)->Arg(2)->Arg(4)->Arg(6);

}  // namespace
BENCHMARK_MAIN();
