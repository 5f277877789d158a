#include <random>

#include <benchmark/benchmark.h>

#include "mkme/covariance_selection.hpp"
#include "mkme/density.hpp"
#include "mkme/estimators.hpp"
#include "mkme/mmd.hpp"
#include "mkme/rng.hpp"

namespace {

mkme::DataMatrix sample(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double shift = 0.0) {
  mkme::Rng rng = mkme::Rng::stream(seed, "bench");
  std::normal_distribution<double> z;
  mkme::DataMatrix m(n, d);
  for (auto& v : m.reshaped()) v = shift + z(rng);
  return m;
}

void BM_Gram(benchmark::State& state) {
  const auto xs = sample(state.range(0), state.range(1), 1);
  const auto bw = mkme::median_heuristic(xs);
  for (auto _ : state) benchmark::DoNotOptimize(mkme::gram(xs, xs, bw).entries.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Gram)->Args({100, 10})->Args({400, 10})->Args({100, 100});

void BM_MarginalGram(benchmark::State& state) {
  const auto xs = sample(state.range(0), state.range(1), 2);
  const auto bw = mkme::median_heuristic(xs);
  const auto cov = mkme::CorruptionModel::isotropic(0.5 * bw.theta2());
  for (auto _ : state) benchmark::DoNotOptimize(mkme::marginal_gram(xs, cov, xs, cov, bw).entries.data());
}
BENCHMARK(BM_MarginalGram)->Args({100, 10})->Args({400, 10});

void BM_LoocvObjective(benchmark::State& state) {
  const auto xs = sample(state.range(0), state.range(1), 3);
  const auto bw = mkme::median_heuristic(xs);
  const mkme::LoocvObjective objective(xs, bw);
  const auto cov = mkme::CorruptionModel::isotropic(0.1 * bw.theta2());
  for (auto _ : state) benchmark::DoNotOptimize(objective(cov));
}
BENCHMARK(BM_LoocvObjective)->Args({50, 10})->Args({200, 10})->Args({50, 100});

void BM_SelectIsotropic(benchmark::State& state) {
  const auto xs = sample(state.range(0), state.range(1), 4);
  const auto bw = mkme::median_heuristic(xs);
  for (auto _ : state) benchmark::DoNotOptimize(mkme::select_isotropic(xs, bw).value);
}
BENCHMARK(BM_SelectIsotropic)->Args({50, 10})->Args({200, 10});

void BM_SelectDiagonal(benchmark::State& state) {
  const auto xs = sample(state.range(0), state.range(1), 5);
  const auto bw = mkme::median_heuristic(xs);
  for (auto _ : state)
    benchmark::DoNotOptimize(mkme::select_covariance(xs, bw, mkme::CorruptionFamily::Diagonal).value);
}
BENCHMARK(BM_SelectDiagonal)->Args({50, 5})->Args({50, 20})->Unit(benchmark::kMillisecond);

void BM_FitShrinkage(benchmark::State& state) {
  const auto xs = sample(state.range(0), 5, 6);
  const auto bw = mkme::median_heuristic(xs);
  const auto kind = mkme::EstimatorKind::fkmse();
  for (auto _ : state) benchmark::DoNotOptimize(mkme::fit(xs, bw, kind).beta.data());
}
BENCHMARK(BM_FitShrinkage)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_TwoSampleTest(benchmark::State& state) {
  const auto a = sample(state.range(0), 2, 7);
  const auto b = sample(state.range(0), 2, 8, 0.5);
  const auto bw = mkme::pooled_bandwidth(a, b);
  const auto kind = state.range(1) ? mkme::EstimatorKind::mkme() : mkme::EstimatorKind::kme();
  mkme::TwoSampleOptions opts;
  opts.permutations = 200;
  opts.seed = 9;
  for (auto _ : state) benchmark::DoNotOptimize(mkme::two_sample_test(a, b, bw, kind, opts).p_value);
}
BENCHMARK(BM_TwoSampleTest)->Args({50, 0})->Args({50, 1})->Args({100, 1})->Unit(benchmark::kMillisecond);

void BM_MatchMixture(benchmark::State& state) {
  const auto xs = sample(200, 3, 10);
  const auto bw = mkme::median_heuristic(xs);
  const auto est = mkme::fit_kme(xs, bw);
  const auto protos = mkme::kmeans(xs, static_cast<std::size_t>(state.range(0)), 50, 11);
  for (auto _ : state) benchmark::DoNotOptimize(mkme::match_mixture(est, protos).weights.data());
}
BENCHMARK(BM_MatchMixture)->Arg(5)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
