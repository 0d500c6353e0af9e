#include <benchmark/benchmark.h>

#include "holmes/bc.hpp"
#include "holmes/cppn.hpp"
#include "holmes/embedding.hpp"
#include "holmes/lenia.hpp"
#include "holmes/tree.hpp"

namespace {

using namespace holmes;

Grid seeded_pattern(int side, std::uint64_t seed) {
  Rng rng(seed);
  const auto genome = cppn::random_genome(rng);
  return cppn::render_init_state(genome, {side, side});
}

void BM_LeniaStep(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  lenia::Simulator sim({side, side});
  sim.set_rule({});
  Grid g = seeded_pattern(side, 1);
  for (auto _ : state) {
    g = sim.step(g);
    benchmark::DoNotOptimize(g.data().data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_LeniaStep)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Rollout(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  lenia::Simulator sim({side, side});
  sim.set_rule({});
  const Grid init = seeded_pattern(side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(lenia::rollout(sim, init, 100).final.data().data());
}
BENCHMARK(BM_Rollout)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_CppnRender(benchmark::State& state) {
  Rng rng(3);
  const auto genome = cppn::random_genome(rng);
  const int side = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cppn::render_init_state(genome, {side, side}).data().data());
}
BENCHMARK(BM_CppnRender)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Descriptor(benchmark::State& state) {
  const auto kind = static_cast<bc::FeatureKind>(state.range(0));
  lenia::Simulator sim({128, 128});
  sim.set_rule({});
  const Grid g = lenia::rollout(sim, seeded_pattern(128, 4), 50).final;
  for (auto _ : state) benchmark::DoNotOptimize(bc::compute_features(kind, g).values.data());
  state.SetLabel(std::string(bc::to_string(kind)));
}
BENCHMARK(BM_Descriptor)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_VaeEncode(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Rng rng(5);
  EmbeddingModule m({side, 16, 64, 16}, false, rng);
  const Grid g = seeded_pattern(side, 6);
  for (auto _ : state) benchmark::DoNotOptimize(m.encode(g, nullptr).data());
}
BENCHMARK(BM_VaeEncode)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_VaeLossBackward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  Rng rng(7);
  nn::VaeModel<float> model({side, 16, 64, 16}, false);
  model.initialize(rng);
  const Grid g = seeded_pattern(side, 8);
  std::vector<float> image(g.data().begin(), g.data().end());
  std::vector<float> eps(16, 0.1f);
  for (auto _ : state) {
    model.zero_gradients();
    benchmark::DoNotOptimize(model.loss(image, eps, nullptr, true).total);
  }
}
BENCHMARK(BM_VaeLossBackward)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FitBoundary(benchmark::State& state) {
  Rng rng(9);
  std::vector<std::vector<double>> points(static_cast<std::size_t>(state.range(0)), std::vector<double>(16));
  for (std::size_t i = 0; i < points.size(); ++i)
    for (double& v : points[i]) v = rng.normal(i % 2 ? 2.0 : -2.0, 1.0);
  for (auto _ : state) {
    Rng r(10);
    benchmark::DoNotOptimize(fit_boundary(points, r).inertia);
  }
}
BENCHMARK(BM_FitBoundary)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
