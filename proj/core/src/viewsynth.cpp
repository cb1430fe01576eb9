#include "parallax/viewsynth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>

#include "parallax/thread_pool.hpp"
#include "raster.hpp"

namespace parallax::viewsynth {

namespace {

constexpr std::size_t kVertexChunk = 1u << 15;
constexpr std::size_t kTriangleChunk = 1u << 15;

std::size_t chunks(std::size_t n, std::size_t size) { return (n + size - 1) / size; }

}  // namespace

std::array<double, 5> blend_weights(const geometry::QuadRig& rig, const Eigen::Vector3d& eye) {
  const double a = std::min(1.0, std::abs(eye.x()) / rig.r_w);
  const double b = std::min(1.0, std::abs(eye.y()) / rig.r_h);
  // Corners: 1 (-,+), 2 (+,+), 3 (-,-), 4 (+,-).
  const bool right = eye.x() >= 0.0, top = eye.y() >= 0.0;
  const std::size_t quadrant = 1 + (right ? 1 : 0) + (top ? 0 : 2);
  const std::size_t x_side[2] = {static_cast<std::size_t>(right ? 2 : 1), static_cast<std::size_t>(right ? 4 : 3)};
  const std::size_t y_side[2] = {static_cast<std::size_t>(top ? 1 : 3), static_cast<std::size_t>(top ? 2 : 4)};
  std::array<double, 5> w{};
  w[0] = (1.0 - a) * (1.0 - b);
  w[quadrant] += a * b;
  for (std::size_t i : x_side) w[i] += 0.5 * a * (1.0 - b);
  for (std::size_t i : y_side) w[i] += 0.5 * (1.0 - a) * b;
  return w;
}

int contributor_weights(const std::array<double, 5>& weights, const std::array<float, 5>& inv_depth,
                        std::array<double, 5>& out) {
  out.fill(0.0);
  float nearest = 0.0f;
  for (float iz : inv_depth) nearest = std::max(nearest, iz);
  if (!(nearest > 0.0f)) return 0;
  // depth_k <= (1 + tol) * depth_nearest  <=>  iz_k * (1 + tol) >= nearest
  const double limit = static_cast<double>(nearest) / (1.0 + kBlendTolerance);
  int count = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    if (inv_depth[k] > 0.0f && static_cast<double>(inv_depth[k]) >= limit) {
      out[k] = weights[k];
      sum += weights[k];
      ++count;
    }
  }
  for (std::size_t k = 0; k < 5; ++k) {
    if (!(inv_depth[k] > 0.0f && static_cast<double>(inv_depth[k]) >= limit)) continue;
    out[k] = sum > 0.0 ? out[k] / sum : 1.0 / count;
  }
  return count;
}

struct Synthesizer::Impl {
  std::array<geometry::DepthMesh, 5> meshes;
  std::array<raster::Projected, 5> projected;
  std::array<raster::Target, 5> targets;
  Frame frame;
  std::optional<ThreadPool> pool;
  int bands = 1;
  // bins[mesh][chunk * bands + band]: triangle indices touching that band.
  std::array<std::vector<std::vector<std::uint32_t>>, 5> bins;

  int band_row(int band, int height) const {
    return static_cast<int>(static_cast<long long>(height) * band / bands);
  }

  void composite_rows(const std::array<double, 5>& w, int row0, int row1) {
    const int width = frame.intensity.width();
    std::array<float, 5> iz{};
    std::array<double, 5> cw{};
    for (int y = row0; y < row1; ++y)
      for (int x = 0; x < width; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
        for (std::size_t k = 0; k < 5; ++k) iz[k] = targets[k].inv_depth[idx];
        if (contributor_weights(w, iz, cw) == 0) {
          frame.intensity.at(x, y) = 0.0f;
          frame.covered.at(x, y) = 0;
          continue;
        }
        double v = 0.0;
        for (std::size_t k = 0; k < 5; ++k)
          if (cw[k] > 0.0) v += cw[k] * targets[k].intensity[idx];
        frame.intensity.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        frame.covered.at(x, y) = 1;
      }
  }
};

Synthesizer::Synthesizer(const SceneBundle& bundle, SynthConfig cfg) : bundle_(bundle), impl_(std::make_unique<Impl>()) {
  bundle.validate();
  const int w = bundle.gds[0].width(), h = bundle.gds[0].height();
  for (std::size_t k = 0; k < 5; ++k) {
    impl_->meshes[k] = geometry::depth_to_mesh(bundle.gds[k], bundle.rig.views[k]);
    impl_->projected[k].resize(impl_->meshes[k].vertex_count());
    impl_->targets[k].reset(w, h);
  }
  impl_->frame.intensity = ImageGray(w, h, 0.0f);
  impl_->frame.covered = Mask(w, h, 0);
  if (cfg.workers > 1) {
    impl_->pool.emplace(cfg.workers);
    impl_->bands = std::clamp(static_cast<int>(cfg.workers) * 4, 1, h);
    for (std::size_t k = 0; k < 5; ++k)
      impl_->bins[k].resize(chunks(impl_->meshes[k].triangles.size(), kTriangleChunk) *
                            static_cast<std::size_t>(impl_->bands));
  }
}

Synthesizer::~Synthesizer() = default;

CameraView Synthesizer::view_for(const Eigen::Vector3d& eye, const Eigen::Matrix3d& rotation) const {
  CameraView v = bundle_.rig.views[0];
  v.position = bundle_.head.clamp(eye);
  v.rotation = rotation;
  return v;
}

const Frame& Synthesizer::render(const Eigen::Vector3d& eye, const Eigen::Matrix3d& rotation) {
  const CameraView cam = view_for(eye, rotation);
  const std::array<double, 5> w = blend_weights(bundle_.rig, cam.position);
  Impl& s = *impl_;
  const int height = cam.height;

  if (!s.pool) {
    for (std::size_t k = 0; k < 5; ++k) {
      const auto& mesh = s.meshes[k];
      raster::project(mesh, cam, s.projected[k], 0, mesh.vertex_count());
      std::fill(s.targets[k].inv_depth.begin(), s.targets[k].inv_depth.end(), 0.0f);
      raster::draw(s.projected[k], mesh.triangles.data(), mesh.triangles.size(), nullptr, 0, height, s.targets[k]);
    }
    s.composite_rows(w, 0, height);
    return s.frame;
  }

  // Projection, split by vertex chunk.
  std::array<std::size_t, 6> vstart{};
  for (std::size_t k = 0; k < 5; ++k) vstart[k + 1] = vstart[k] + chunks(s.meshes[k].vertex_count(), kVertexChunk);
  const auto locate = [](const std::array<std::size_t, 6>& start, std::size_t task) {
    std::size_t k = 0;
    while (task >= start[k + 1]) ++k;
    return std::pair{k, task - start[k]};
  };
  s.pool->parallel_for(vstart[5], [&](std::size_t task) {
    const auto [k, c] = locate(vstart, task);
    const std::size_t n = s.meshes[k].vertex_count();
    raster::project(s.meshes[k], cam, s.projected[k], c * kVertexChunk, std::min(n, (c + 1) * kVertexChunk));
  });

  // Bin triangles into row bands, one bin list per (mesh, chunk, band) so
  // every band sees its triangles in mesh order.
  std::array<std::size_t, 6> tstart{};
  for (std::size_t k = 0; k < 5; ++k) tstart[k + 1] = tstart[k] + chunks(s.meshes[k].triangles.size(), kTriangleChunk);
  const auto bands = static_cast<std::size_t>(s.bands);
  s.pool->parallel_for(tstart[5], [&](std::size_t task) {
    const auto [k, c] = locate(tstart, task);
    const auto& tris = s.meshes[k].triangles;
    auto* bins = &s.bins[k][c * bands];
    for (std::size_t b = 0; b < bands; ++b) bins[b].clear();
    const std::size_t end = std::min(tris.size(), (c + 1) * kTriangleChunk);
    for (std::size_t t = c * kTriangleChunk; t < end; ++t) {
      const raster::RowSpan span = raster::triangle_rows(s.projected[k], tris[t], height);
      if (span.row0 >= span.row1) continue;
      // First band whose end exceeds row0, then walk while the band start is below row1.
      std::size_t b = static_cast<std::size_t>(static_cast<long long>(span.row0) * s.bands / height);
      while (b > 0 && s.band_row(static_cast<int>(b), height) > span.row0) --b;
      while (s.band_row(static_cast<int>(b) + 1, height) <= span.row0) ++b;
      for (; b < bands && s.band_row(static_cast<int>(b), height) < span.row1; ++b)
        bins[b].push_back(static_cast<std::uint32_t>(t));
    }
  });

  s.pool->parallel_for(bands, [&](std::size_t b) {
    const int row0 = s.band_row(static_cast<int>(b), height);
    const int row1 = s.band_row(static_cast<int>(b) + 1, height);
    const std::size_t width = static_cast<std::size_t>(cam.width);
    for (std::size_t k = 0; k < 5; ++k) {
      auto& t = s.targets[k];
      std::fill(t.inv_depth.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(row0) * width),
                t.inv_depth.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(row1) * width), 0.0f);
      const auto& tris = s.meshes[k].triangles;
      const std::size_t nchunks = tstart[k + 1] - tstart[k];
      for (std::size_t c = 0; c < nchunks; ++c) {
        const auto& bin = s.bins[k][c * bands + b];
        raster::draw(s.projected[k], tris.data(), bin.size(), bin.data(), row0, row1, t);
      }
    }
    s.composite_rows(w, row0, row1);
  });
  return s.frame;
}

Frame synthesize(const SceneBundle& bundle, const Eigen::Vector3d& eye, const Eigen::Matrix3d& rotation,
                 SynthConfig cfg) {
  Synthesizer s(bundle, cfg);
  return s.render(eye, rotation);
}

std::vector<Pose> benchmark_path(const SceneBundle& bundle, std::size_t n_frames) {
  std::vector<Pose> path;
  path.reserve(n_frames);
  const double rx = 0.9 * bundle.head.hi.x(), ry = 0.9 * bundle.head.hi.y();
  const double z_end = 0.9 * bundle.head.lo.z();
  const std::size_t n_circle = (n_frames + 1) / 2;
  const std::size_t n_dolly = n_frames - n_circle;
  const Eigen::Vector3d& target = bundle.rig.center;
  for (std::size_t i = 0; i < n_circle; ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_circle);
    const Eigen::Vector3d eye(rx * std::cos(t), ry * std::sin(t), 0.0);
    path.push_back({eye, look_at(eye, target, bundle.rig.up)});
  }
  // Dolly from where the circle closes towards the scene.
  const Eigen::Vector3d from(rx, 0.0, 0.0), to(0.0, 0.0, z_end);
  for (std::size_t i = 1; i <= n_dolly; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n_dolly);
    const Eigen::Vector3d eye = (1.0 - t) * from + t * to;
    path.push_back({eye, look_at(eye, target, bundle.rig.up)});
  }
  return path;
}

TimingReport summarize(std::vector<double> samples_ms) {
  TimingReport r;
  r.frames = samples_ms.size();
  r.samples_ms = samples_ms;
  if (samples_ms.empty()) return r;
  std::sort(samples_ms.begin(), samples_ms.end());
  double sum = 0.0;
  for (double v : samples_ms) sum += v;
  const std::size_t n = samples_ms.size();
  r.mean_ms = sum / static_cast<double>(n);
  r.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n)));
  r.p99_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  return r;
}

TimingReport benchmark(const SceneBundle& bundle, std::size_t n_frames, SynthConfig cfg) {
  if (n_frames == 0) return {};
  Synthesizer synth(bundle, cfg);
  const auto path = benchmark_path(bundle, n_frames);
  synth.render(path.front().eye, path.front().rotation);  // warm caches and bins
  std::vector<double> samples;
  samples.reserve(n_frames);
  for (const Pose& pose : path) {
    const auto t0 = std::chrono::steady_clock::now();
    synth.render(pose.eye, pose.rotation);
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return summarize(std::move(samples));
}

}  // namespace parallax::viewsynth
