#include <memory>

#include <benchmark/benchmark.h>

#include "ibmvs/decision.hpp"
#include "ibmvs/engine.hpp"
#include "ibmvs/neural/networks.hpp"
#include "ibmvs/neural/ops.hpp"
#include "ibmvs/random.hpp"
#include "ibmvs/sampler.hpp"
#include "ibmvs/scenegen.hpp"

using namespace ibmvs;

namespace {

SceneSpec plane_scene(int size) {
  SceneSpec s;
  s.width = s.height = size;
  s.rig.count = 5;
  s.rig.focal = size;
  s.rig.target = {0, 0, 2};
  PrimitiveSpec p;
  p.point = {0, 0, 2};
  s.primitives.push_back(p);
  return s;
}

Tensor random_tensor(int c, int h, int w, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor t(c, h, w);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

void BM_Conv2d(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const Tensor x = random_tensor(c, 64, 64, 1);
  const Tensor wt = random_tensor(1, 1, c * c * 9, 2);
  const nn::Param w{{std::uint32_t(c), std::uint32_t(c), 3, 3},
                    std::vector<float>(wt.data().begin(), wt.data().end())};
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, w, nullptr, 1, nn::Activation::kLeakyReLU));
  state.SetItemsProcessed(state.iterations() * 64 * 64 * c * c * 9);
}
BENCHMARK(BM_Conv2d)->Arg(8)->Arg(32);

void BM_DeformableConv(benchmark::State& state) {
  const auto b = render(plane_scene(64));
  const SampleGrid grid = build_sample_grid(b.views[0].camera, b.views[1].camera, ScalarMap(64, 64, 0.5), 5);
  const Tensor feat = random_tensor(8, 64, 64, 3);
  const Tensor wt = random_tensor(1, 1, 8 * 8 * 25, 4);
  const nn::Param w{{8, 8, 5, 5}, std::vector<float>(wt.data().begin(), wt.data().end())};
  for (auto _ : state)
    benchmark::DoNotOptimize(
        nn::deformable_epipolar_conv(feat, grid, b.views[1].camera, w, nullptr, nn::Activation::kIdentity));
}
BENCHMARK(BM_DeformableConv);

void BM_ZnccOracle(benchmark::State& state) {
  const auto b = render(plane_scene(static_cast<int>(state.range(0))));
  const auto iv = make_interval(1.0, 4.0);
  const ScalarMap H(b.views[0].camera.width, b.views[0].camera.height, iv.midpoint);
  for (auto _ : state)
    benchmark::DoNotOptimize(photoconsistency_oracle(b.views[0], b.views[1], H, 3, iv, ZnccConfig{}));
}
BENCHMARK(BM_ZnccOracle)->Arg(64)->Arg(128);

void BM_EngineIteration(benchmark::State& state) {
  const auto b = render(plane_scene(64));
  const auto iv = make_interval(1.0, 4.0);
  PhotoconsistencyOracle zncc;
  EntropyWeights ew;
  EngineConfig cfg;
  cfg.iterations = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_engine(b, iv, zncc, ew, cfg));
}
BENCHMARK(BM_EngineIteration);

}  // namespace
BENCHMARK_MAIN();
