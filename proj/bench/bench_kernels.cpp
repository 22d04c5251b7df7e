// Serial reference kernels against their OpenMP counterparts.

#include <random>

#include <benchmark/benchmark.h>

#include "pmest/parallel.hpp"
#include "pmest/rng.hpp"

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols) {
  auto e = pmest::RngStream{1, 2}.engine();
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = nd(e);
  return m;
}

template <bool Parallel>
void gram(benchmark::State& state) {
  const auto d = state.range(0), n = state.range(1);
  const Eigen::MatrixXd x = random_matrix(d, n);
  if (Parallel) pmest::set_num_threads(static_cast<int>(state.range(2)));
  for (auto _ : state) {
    Eigen::MatrixXd g = Parallel ? pmest::par::gram(x) : pmest::ref::gram(x);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * d * d * n);
}

template <bool Parallel>
void quadratic_forms(benchmark::State& state) {
  const auto d = state.range(0), n = state.range(1);
  const Eigen::MatrixXd x = random_matrix(d, n);
  const Eigen::MatrixXd a = random_matrix(d, d);
  const Eigen::MatrixXd r = a * a.transpose();
  if (Parallel) pmest::set_num_threads(static_cast<int>(state.range(2)));
  for (auto _ : state) {
    Eigen::VectorXd q = Parallel ? pmest::par::column_quadratic_forms(x, r) : pmest::ref::column_quadratic_forms(x, r);
    benchmark::DoNotOptimize(q.data());
  }
  state.SetItemsProcessed(state.iterations() * d * d * n);
}

}  // namespace

BENCHMARK(gram<false>)->Args({50, 10000})->Args({200, 20000})->Unit(benchmark::kMillisecond);
BENCHMARK(gram<true>)
    ->ArgsProduct({{50}, {10000}, {1, 4, 8}})
    ->ArgsProduct({{200}, {20000}, {1, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(quadratic_forms<false>)->Args({50, 10000})->Args({200, 20000})->Unit(benchmark::kMillisecond);
BENCHMARK(quadratic_forms<true>)
    ->ArgsProduct({{50}, {10000}, {1, 4, 8}})
    ->ArgsProduct({{200}, {20000}, {1, 4, 8}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
