#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "ppde/expectation.hpp"
#include "ppde/functionals.hpp"
#include "ppde/montecarlo.hpp"
#include "ppde/snell.hpp"
#include "ppde/solvers.hpp"
#include "ppde/tree.hpp"

using namespace ppde;

namespace {

ObstacleProcess random_obstacle(const ScenarioTree& tree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ObstacleProcess obs;
  obs.values = NodeTable<double>(tree.depth());
  for (int l = 0; l <= tree.depth(); ++l)
    for (auto& v : obs.values.level(l)) v = u(rng);
  return obs;
}

void BM_UpperExpectationTree(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  TimeGrid grid(1.0, n);
  ScenarioTree tree(grid);
  PathFunctional xi = running_max();
  DriftBound bound(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(upper_expectation(tree, xi, bound).root);
  state.SetComplexityN(n);
}

void BM_SnellEnvelope(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  TimeGrid grid(1.0, n);
  ScenarioTree tree(grid);
  ObstacleProcess obs = random_obstacle(tree, 42);
  DriftBound bound(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(snell(tree, obs, bound).root);
  state.SetComplexityN(n);
}

void BM_BsdeTree(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  TimeGrid grid(1.0, n);
  ScenarioTree tree(grid);
  PathFunctional xi = time_average();
  Generator gen = Generator::decay();
  for (auto _ : state) benchmark::DoNotOptimize(solve_bsde(tree, xi, gen).root);
  state.SetComplexityN(n);
}

void BM_BsdeLattice(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  TimeGrid grid(1.0, n);
  PathFunctional xi = terminal_square();
  Generator gen = Generator::decay();
  for (auto _ : state) benchmark::DoNotOptimize(solve_bsde_lattice(grid, xi, gen));
  state.SetComplexityN(n);
}

void BM_LookbackLattice(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  TimeGrid grid(1.0, n);
  auto payoff = [](double, double m) { return m; };
  for (auto _ : state) benchmark::DoNotOptimize(lookback_lattice(grid, payoff));
  state.SetComplexityN(n);
}

void BM_HeatMonteCarlo(benchmark::State& state) {
  const std::size_t paths = static_cast<std::size_t>(state.range(0));
  TimeGrid grid(1.0, 64);
  PathFunctional xi = running_max();
  for (auto _ : state) benchmark::DoNotOptimize(solve_heat_mc(xi, grid, 1, paths, 7).value);
  state.SetItemsProcessed(static_cast<std::int64_t>(paths) * state.iterations());
}

}  // namespace

BENCHMARK(BM_UpperExpectationTree)->Arg(10)->Arg(14)->Arg(18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SnellEnvelope)->Arg(10)->Arg(14)->Arg(18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BsdeTree)->Arg(10)->Arg(14)->Arg(18)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BsdeLattice)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LookbackLattice)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_HeatMonteCarlo)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
