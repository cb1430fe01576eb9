#include <benchmark/benchmark.h>

#include <random>

#include "fixtures.hpp"
#include "parallax/disparity.hpp"
#include "parallax/geometry.hpp"
#include "parallax/inpaint.hpp"
#include "parallax/rectify.hpp"
#include "synthetic.hpp"

using namespace parallax;

namespace {

CameraView centred(int w, int h, double f) { return testing::centred_view(w, h, f); }

void BM_Fundamental(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto pair = testing::random_camera_pair(rng, 8.0, 640, 480, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rectify::estimate_fundamental(pair.matches));
}
BENCHMARK(BM_Fundamental)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Disparity(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0)), h = w * 3 / 4;
  const auto s = testing::two_plane_stereo(w, h, 4.0, 17.0, 5);
  for (auto _ : state) benchmark::DoNotOptimize(disparity::dense_disparity(s.left, {}, s.right, {}));
}
BENCHMARK(BM_Disparity)->Arg(160)->Arg(320)->Unit(benchmark::kMillisecond);

void BM_MeshAndRender(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(9);
  const GDImage gd = testing::smooth_random_gd(n, n, rng);
  const CameraView cam = centred(n, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::render(geometry::depth_to_mesh(gd, cam), cam));
}
BENCHMARK(BM_MeshAndRender)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_DoubleReproject(benchmark::State& state) {
  const GDImage gd = testing::two_plane_gd(200, 160, 80, 130, 50, 110, 1.0, 2.0);
  const CameraView cam = centred(200, 160, 300.0);
  CameraView target = cam;
  target.position = {0.08, 0.0, 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(geometry::double_reproject(gd, cam, target));
}
BENCHMARK(BM_DoubleReproject)->Unit(benchmark::kMillisecond);

void BM_CornerGDs(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const GDImage gd = testing::two_plane_gd(n, n, n * 2 / 5, n * 13 / 20, n * 5 / 16, n * 11 / 16, 1.0, 2.0);
  const auto rig = geometry::make_rig(centred(n, n, 1.5 * n), {0, 0, -1.5}, 0.05, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(inpaint::corner_gds(gd, rig));
}
BENCHMARK(BM_CornerGDs)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
