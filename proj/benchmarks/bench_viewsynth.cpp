#include <benchmark/benchmark.h>

#include <map>

#include "fixtures.hpp"
#include "parallax/viewsynth.hpp"

using namespace parallax;

namespace {

const SceneBundle& scene(int size) {
  static std::map<int, SceneBundle> cache;
  auto it = cache.find(size);
  if (it == cache.end()) it = cache.emplace(size, testing::two_plane_bundle(size, size)).first;
  return it->second;
}

// Frames along the fixed camera path; args: size, workers.
void BM_Synthesize(benchmark::State& state) {
  const SceneBundle& b = scene(static_cast<int>(state.range(0)));
  viewsynth::Synthesizer synth(b, {static_cast<unsigned>(state.range(1))});
  const auto path = viewsynth::benchmark_path(b, 120);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& pose = path[i++ % path.size()];
    benchmark::DoNotOptimize(synth.render(pose.eye, pose.rotation).intensity.data().data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Synthesize)->Args({64, 1})->Args({256, 1})->Args({512, 1})->Args({512, 8})->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_SynthesizerSetup(benchmark::State& state) {
  const SceneBundle& b = scene(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    viewsynth::Synthesizer synth(b);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_SynthesizerSetup)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
