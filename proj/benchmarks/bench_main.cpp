#include <random>

#include <benchmark/benchmark.h>

#include "rpcomb/aggregator.hpp"
#include "rpcomb/learners.hpp"
#include "rpcomb/projection.hpp"
#include "rpcomb/simgen.hpp"

namespace {

using namespace rpcomb;

Matrix gaussian(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(gen);
  return m;
}

Vector gaussian_vec(std::mt19937_64& gen, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (auto& x : v) x = nd(gen);
  return v;
}

// 150 aggregation rows x M = 1000 machines, 150 queries; Arg is m (0: full).
void BM_PredictBatch(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const Matrix x = gaussian(gen, 150, 1000), q = gaussian(gen, 150, 1000);
  const Vector y = gaussian_vec(gen, 150);
  const auto m = static_cast<std::size_t>(state.range(0));
  std::optional<AggregatorModel> model;
  if (m == 0) {
    model.emplace(x, y, KernelSpec{2.0, 1.0, 40.0});
  } else {
    const auto g = sample_projection(1000, m, 5);
    model.emplace(project(x, g), y, KernelSpec{2.0, 1.0, 40.0}, g);
  }
  for (auto _ : state) benchmark::DoNotOptimize(model->predict_batch(q));
}
BENCHMARK(BM_PredictBatch)->Arg(0)->Arg(2)->Arg(9)->Arg(100)->Arg(900);

void BM_SampleProjection(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_projection(1000, m, ++seed));
}
BENCHMARK(BM_SampleProjection)->Arg(2)->Arg(100)->Arg(900);

void BM_TuneBandwidth(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const Matrix x = gaussian(gen, 150, state.range(0));
  const Vector y = gaussian_vec(gen, 150);
  const auto method = state.range(1) ? TuneMethod::kGrid : TuneMethod::kGradientDescent;
  for (auto _ : state) benchmark::DoNotOptimize(tune_bandwidth(x, y, {2.0, 1.0}, method));
}
BENCHMARK(BM_TuneBandwidth)->Args({9, 0})->Args({9, 1})->Args({1000, 0});

void BM_FitForest(benchmark::State& state) {
  auto spec = SimModelSpec::defaults(1, 11);
  spec.n = 300;
  const auto ds = generate(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_tree_ensemble(ds, Family::kRandomForest, state.range(0), 3));
  }
}
BENCHMARK(BM_FitForest)->Arg(18)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_BoostingPath(benchmark::State& state) {
  auto spec = SimModelSpec::defaults(1, 12);
  spec.n = 300;
  const auto ds = generate(spec);
  std::vector<std::size_t> stages;
  for (std::size_t s = 18; s <= 315; s += 3) stages.push_back(s);
  for (auto _ : state) benchmark::DoNotOptimize(fit_boosting_path(ds, stages));
}
BENCHMARK(BM_BoostingPath)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
