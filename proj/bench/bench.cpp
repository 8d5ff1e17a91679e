#include "omrsc/features.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

using namespace omrsc;

namespace {

const DensityMap& phantom() {
  static const DensityMap d = random_walk_density(50, 21, 1);
  return d;
}

const Dataset& images() {
  static const Dataset data = generate(phantom(), 200, 2);
  return data;
}

// Range 0 selects the serial reference, otherwise the OpenMP kernel on that many threads.
void set_threads(const benchmark::State& state) { omp_set_num_threads(std::max<int>(1, int(state.range(0)))); }

void BM_rasterize(benchmark::State& state) {
  set_threads(state);
  const GaussianMixture mix = phantom().mixture();
  for (auto _ : state) benchmark::DoNotOptimize(state.range(0) ? rasterize(mix, 21) : serial::rasterize(mix, 21));
}

void BM_generate(benchmark::State& state) {
  set_threads(state);
  const GaussianMixture mix = phantom().mixture();
  for (auto _ : state) benchmark::DoNotOptimize(state.range(0) ? generate(mix, 21, 200, 3) : serial::generate(mix, 21, 200, 3));
}

void BM_polar_fourier(benchmark::State& state) {
  set_threads(state);
  const FeatureGrids g = make_grids(FeatureParams::desk(), 21);
  const Image& img = images().images[1];
  for (auto _ : state)
    benchmark::DoNotOptimize(state.range(0) ? polar_fourier(img, g.k.nodes, g.phi.nodes) : serial::polar_fourier(img, g.k.nodes, g.phi.nodes));
}

void BM_autocorr(benchmark::State& state) {
  set_threads(state);
  FeatureParams p = FeatureParams::desk();
  p.Phi = 64;
  const FeatureGrids g = make_grids(p, 21);
  const std::vector<Image> batch(images().images.begin(), images().images.begin() + 20);
  for (auto _ : state)
    benchmark::DoNotOptimize(state.range(0) ? empirical_autocorr(batch, g) : serial::empirical_autocorr(batch, g));
}

void args(benchmark::internal::Benchmark* b) {
  b->Arg(0);
  for (int t = 1; t <= omp_get_num_procs(); t *= 2) b->Arg(t);
  b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_rasterize)->Apply(args);
BENCHMARK(BM_generate)->Apply(args);
BENCHMARK(BM_polar_fourier)->Apply(args);
BENCHMARK(BM_autocorr)->Apply(args);

BENCHMARK_MAIN();
