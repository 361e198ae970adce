#include <benchmark/benchmark.h>

#include <vector>

#include "icl/model.hpp"
#include "icl/oracle.hpp"
#include "icl/rng.hpp"
#include "icl/tasks.hpp"
#include "icl/wavelet.hpp"

namespace {

void BM_CardinalBspline(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  double x = 0.0;
  for (auto _ : state) {
    x += 0.001;
    if (x > m + 1) x = 0.0;
    benchmark::DoNotOptimize(icl::cardinal_bspline(m, x));
  }
}
BENCHMARK(BM_CardinalBspline)->Arg(2)->Arg(4)->Arg(8);

// Top-layer feature vector at d = 2, resolution K.
void BM_TopFeatures(benchmark::State& state) {
  const icl::BasisLayout layout = icl::build_layout(2, 2, static_cast<int>(state.range(0)));
  std::vector<double> out(layout.top_size());
  icl::Rng rng(7);
  for (auto _ : state) {
    const double x[] = {rng.uniform(), rng.uniform()};
    icl::top_layer_features(layout, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_TopFeatures)->DenseRange(1, 4);

void BM_GramMatrix(benchmark::State& state) {
  const icl::BasisLayout layout = icl::build_layout(2, 2, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(icl::gram_matrix(layout).values.data());
}
BENCHMARK(BM_GramMatrix)->DenseRange(1, 3);

void BM_GammaStar(benchmark::State& state) {
  icl::TaskDistribution dist;
  dist.k_max = static_cast<int>(state.range(0));
  const icl::BasisLayout layout = icl::build_layout(1, 2, dist.k_max);
  const auto gram = icl::gram_matrix(layout);
  const auto cov = icl::aggregated_cov(dist, layout);
  for (auto _ : state) benchmark::DoNotOptimize(icl::gamma_star(gram, cov, 512.0).gamma.data());
  state.counters["N"] = static_cast<double>(gram.values.rows());
}
BENCHMARK(BM_GammaStar)->DenseRange(3, 7, 2);

void BM_SampleTask(benchmark::State& state) {
  icl::TaskDistribution dist;
  dist.d = 2;
  dist.k_max = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(icl::sample_task(dist, ++seed).layers.data());
}
BENCHMARK(BM_SampleTask)->DenseRange(2, 6, 2);

struct ModelFixture {
  icl::ModelParams params;
  std::vector<icl::Prompt> prompts;

  ModelFixture(icl::Variant v, std::size_t n) {
    icl::TaskDistribution dist;
    dist.d = 8;
    dist.k_max = 1;
    icl::ModelSpec spec;
    spec.variant = v;
    spec.d = dist.d;
    spec.output_clip = dist.clip_level();
    params = icl::init_params(spec, 11);
    prompts = icl::draw_prompts(dist, n, 8, 3, icl::Stream::task, icl::Stream::prompt);
  }
};

void BM_Forward(benchmark::State& state) {
  const ModelFixture f(static_cast<icl::Variant>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(icl::forward(f.params, f.prompts[i++ % f.prompts.size()]));
  state.SetLabel(std::string(icl::variant_name(f.params.spec.variant)));
}

void BM_Gradient(benchmark::State& state) {
  const ModelFixture f(static_cast<icl::Variant>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(icl::batch_gradient(f.params, f.prompts).loss);
  state.SetLabel(std::string(icl::variant_name(f.params.spec.variant)));
}

void model_args(benchmark::internal::Benchmark* b) {
  for (int v = 0; v < 3; ++v) {
    for (int n : {128, 512}) b->Args({v, n});
  }
}
BENCHMARK(BM_Forward)->Apply(model_args);
BENCHMARK(BM_Gradient)->Apply(model_args)->Unit(benchmark::kMillisecond);

}  // namespace

// Own main: the distro libbenchmark_main.a carries LTO bytecode from another gcc.
int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
