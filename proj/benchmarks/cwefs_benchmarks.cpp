#include <random>

#include <benchmark/benchmark.h>

#include "cwefs/dataset.hpp"
#include "cwefs/graph.hpp"
#include "cwefs/mlknn.hpp"
#include "cwefs/solver.hpp"

namespace {

using namespace cwefs;

Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd m(rows, cols);
  for (auto& v : m.reshaped()) v = u(rng);
  return m;
}

void BM_Affinity(benchmark::State& state) {
  const auto n = state.range(0);
  const auto points = uniform(40, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_affinity(points, 5, 1.0));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Affinity)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_Sweep(benchmark::State& state) {
  SyntheticSpec spec;
  spec.instances = static_cast<int>(state.range(0));
  const auto data = normalize_features(generate_synthetic(spec).first);
  const auto problem = Problem::from_dataset(data);
  const auto graphs = ProblemGraphs::build(problem, GraphParams{});
  const HyperParams hp;
  auto s = initialize(problem, hp, 0);
  for (auto _ : state) sweep(s, problem, graphs, hp);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Sweep)->RangeMultiplier(2)->Range(60, 480)->Complexity();

void BM_MlknnPredict(benchmark::State& state) {
  const auto n = state.range(0);
  const auto x = uniform(24, n, 2);
  Eigen::MatrixXd y = (uniform(3, n, 3).array() > 0.5).cast<double>();
  const auto model = MlknnModel::fit(x, y, 10, 1.0);
  const auto q = uniform(24, n / 4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(q));
}
BENCHMARK(BM_MlknnPredict)->RangeMultiplier(2)->Range(64, 512);

}  // namespace

BENCHMARK_MAIN();
