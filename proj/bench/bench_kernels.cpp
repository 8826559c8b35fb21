// Serial reference vs OpenMP kernels. Run with --benchmark_filter to pick one.
#include <benchmark/benchmark.h>

#include <map>
#include <numeric>

#include "dppvfx/nystrom.hpp"
#include "dppvfx/parallel.hpp"
#include "dppvfx/synthetic.hpp"

namespace {

using namespace dppvfx;

const PointCloud& blobs(Index n) {
  static std::map<Index, PointCloud> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    Philox rng(1, 10);
    it = cache.emplace(n, gaussian_blobs({.n = n, .dim = 64, .clusters = 10}, rng)).first;
  }
  return it->second;
}

IndexSequence first_columns(Index count) {
  IndexSequence cols(static_cast<std::size_t>(count));
  std::iota(cols.begin(), cols.end(), Index{0});
  return cols;
}

template <auto Fn>
void rbf_gram(benchmark::State& state) {
  const PointCloud& c = blobs(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(c.points(), 8.0));
}

template <auto Fn>
void rbf_columns(benchmark::State& state) {
  const PointCloud& c = blobs(state.range(0));
  const IndexSequence cols = first_columns(100);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(c.points(), c.squared_norms(), cols, 8.0));
}

template <auto Fn>
void multiply(benchmark::State& state) {
  const Index n = state.range(0);
  Philox rng(2);
  Matrix a(n, 100), b(100, 100);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform();
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
}

template <auto Fn>
void leverage_rows(benchmark::State& state) {
  const PointCloud& c = blobs(state.range(0));
  const PsdKernel k = PsdKernel::rbf(std::make_shared<PointCloud>(c), 8.0);
  const NystromSketch s = NystromSketch::build(k, first_columns(100));
  const Vector diag = k.diagonal();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(s.factor(), s.chol_factor(), diag, 1e-12));
}

template <auto Fn>
void subset_determinants(benchmark::State& state) {
  Philox rng(3);
  const Matrix l = random_psd(state.range(0), state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(l));
}

}  // namespace

BENCHMARK(rbf_gram<serial::rbf_gram>)->Name("rbf_gram/serial")->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(rbf_gram<omp::rbf_gram>)->Name("rbf_gram/omp")->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(rbf_columns<serial::rbf_columns>)->Name("rbf_columns/serial")->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(rbf_columns<omp::rbf_columns>)->Name("rbf_columns/omp")->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(multiply<serial::multiply>)->Name("multiply/serial")->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(multiply<omp::multiply>)->Name("multiply/omp")->Arg(10000)->Arg(50000)->Unit(benchmark::kMillisecond);
BENCHMARK(leverage_rows<serial::leverage_rows>)->Name("leverage_rows/serial")->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(leverage_rows<omp::leverage_rows>)->Name("leverage_rows/omp")->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(subset_determinants<serial::subset_determinants>)->Name("subset_determinants/serial")->Arg(10)->Arg(12);
BENCHMARK(subset_determinants<omp::subset_determinants>)->Name("subset_determinants/omp")->Arg(10)->Arg(12);

BENCHMARK_MAIN();
