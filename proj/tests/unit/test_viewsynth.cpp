#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "parallax/viewsynth.hpp"
#include "synthetic.hpp"

using namespace parallax;
using namespace parallax::viewsynth;

namespace {

const SceneBundle& plane() {
  static const SceneBundle b = testing::plane_bundle(128, 96);
  return b;
}

const SceneBundle& two_plane() {
  static const SceneBundle b = testing::two_plane_bundle(160, 128);
  return b;
}

Eigen::Matrix3d toward_center(const SceneBundle& b, const Eigen::Vector3d& eye) {
  return look_at(eye, b.rig.center, b.rig.up);
}

double mean_abs_diff(const ImageGray& a, const ImageGray& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("blend weights") {
  const auto& rig = plane().rig;
  auto w = blend_weights(rig, {0, 0, 0});
  CHECK(w[0] == 1.0);
  for (std::size_t k = 1; k < 5; ++k) CHECK(w[k] == 0.0);

  // Pure x offset to the left: corners 1 and 3 share a.
  w = blend_weights(rig, {-0.2 * rig.r_w, 0, -0.1});
  CHECK(w[0] == doctest::Approx(0.8));
  CHECK(w[1] == doctest::Approx(0.1));
  CHECK(w[3] == doctest::Approx(0.1));
  CHECK(w[2] == 0.0);
  CHECK(w[4] == 0.0);

  // Upper-right quadrant: a = b = 0.25.
  w = blend_weights(rig, {0.25 * rig.r_w, 0.25 * rig.r_h, 0});
  CHECK(w[0] == doctest::Approx(0.5625));
  CHECK(w[2] == doctest::Approx(0.0625 + 0.09375 + 0.09375));
  CHECK(w[4] == doctest::Approx(0.09375));
  CHECK(w[1] == doctest::Approx(0.09375));
  CHECK(w[3] == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d eye(u(rng) * rig.r_w / 4, u(rng) * rig.r_h / 4, 0.0);
    w = blend_weights(rig, eye);
    double sum = 0;
    for (double v : w) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("contributor weights partition unity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<double, 5> out{};
  for (int i = 0; i < 2000; ++i) {
    std::array<double, 5> w{};
    std::array<float, 5> iz{};
    for (std::size_t k = 0; k < 5; ++k) {
      w[k] = u(rng) < 0.3 ? 0.0 : u(rng);
      iz[k] = u(rng) < 0.2 ? 0.0f : static_cast<float>(0.5 + 0.03 * u(rng));
    }
    const int n = contributor_weights(w, iz, out);
    if (n == 0) continue;
    double sum = 0;
    for (double v : out) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("contributor weights: tolerance and fallbacks") {
  std::array<double, 5> out{};
  const std::array<double, 5> w{0.6, 0.1, 0.1, 0.1, 0.1};
  CHECK(contributor_weights(w, {0, 0, 0, 0, 0}, out) == 0);

  // Nearest surface (largest inverse depth) wins outright beyond 1%.
  CHECK(contributor_weights(w, {0.5f, 0.52f, 0, 0, 0}, out) == 1);
  CHECK(out[1] == 1.0);
  CHECK(out[0] == 0.0);

  // Within 1%: renormalised.
  CHECK(contributor_weights(w, {0.5f, 0.504f, 0, 0, 0}, out) == 2);
  CHECK(out[0] == doctest::Approx(6.0 / 7.0));
  CHECK(out[1] == doctest::Approx(1.0 / 7.0));

  // All contributor weights zero: uniform.
  const std::array<double, 5> ref_only{1, 0, 0, 0, 0};
  CHECK(contributor_weights(ref_only, {0, 0.5f, 0.5f, 0, 0}, out) == 2);
  CHECK(out[1] == 0.5);
  CHECK(out[2] == 0.5);
}

TEST_CASE("reference eye reproduces the reference") {
  for (const SceneBundle* b : {&plane(), &two_plane()}) {
    const Frame f = synthesize(*b, {0, 0, 0}, Eigen::Matrix3d::Identity());
    const auto& ref = b->gds[0].intensity();
    double worst = 0;
    for (int y = 0; y < ref.height(); ++y)
      for (int x = 0; x < ref.width(); ++x) {
        CHECK(f.covered.at(x, y) == 1);
        worst = std::max(worst, static_cast<double>(std::abs(f.intensity.at(x, y) - ref.at(x, y))));
      }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("eye at the head-volume corner is hole free") {
  for (const SceneBundle* b : {&plane(), &two_plane()}) {
    const Eigen::Vector3d eye(-b->rig.r_w / 4, b->rig.r_h / 4, 0.0);
    for (const Eigen::Matrix3d& rot : {Eigen::Matrix3d(Eigen::Matrix3d::Identity()), toward_center(*b, eye)}) {
      const Frame f = synthesize(*b, eye, rot);
      std::size_t holes = 0;
      for (std::size_t i = 0; i < f.covered.size(); ++i) holes += f.covered[i] == 0;
      CHECK(holes == 0);
    }
  }
}

TEST_CASE("eye outside the volume is clamped") {
  const SceneBundle& b = two_plane();
  const Eigen::Matrix3d rot = toward_center(b, {0.01, 0.0, -0.02});
  const Eigen::Vector3d outside(5.0, -3.0, 2.0);
  const Frame a = synthesize(b, outside, rot);
  const Frame c = synthesize(b, b.head.clamp(outside), rot);
  CHECK(a.intensity == c.intensity);
  CHECK(a.covered == c.covered);
}

TEST_CASE("single plane renders as a homography warp") {
  const SceneBundle& b = plane();
  const CameraView& ref = b.rig.views[0];
  const double depth = b.gds[0].depth().at(0, 0);
  Synthesizer synth(b);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d eye = b.head.lo + (b.head.hi - b.head.lo).cwiseProduct(Eigen::Vector3d(u(rng), u(rng), u(rng)));
    const Eigen::Matrix3d rot = i % 2 ? toward_center(b, eye) : Eigen::Matrix3d::Identity();
    const Frame& f = synth.render(eye, rot);
    const CameraView view = synth.view_for(eye, rot);
    double worst = 0;
    std::size_t checked = 0;
    for (int y = 0; y < f.intensity.height(); ++y)
      for (int x = 0; x < f.intensity.width(); ++x) {
        const Eigen::Vector3d dir = view.rotation * Eigen::Vector3d((x - view.principal.x()) / view.focal,
                                                                    -(y - view.principal.y()) / view.focal, -1.0);
        const double t = (-depth - view.position.z()) / dir.z();
        const Eigen::Vector2d s = ref.project(ref.world_to_camera(view.position + t * dir));
        if (s.x() < 1 || s.y() < 1 || s.x() > ref.width - 2 || s.y() > ref.height - 2) continue;
        ++checked;
        worst = std::max(worst, std::abs(f.intensity.at(x, y) - testing::plane_texture(s.x(), s.y())));
      }
    CHECK(checked > 0);
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("small eye motion gives a small image change") {
  const SceneBundle& b = plane();
  const double step = b.rig.r_w / 1000.0;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Synthesizer s1(b), s2(b);
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector3d eye = b.head.lo + (b.head.hi - b.head.lo).cwiseProduct(Eigen::Vector3d(u(rng), u(rng), u(rng)));
    Eigen::Vector3d d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    d *= step / d.norm();
    const Eigen::Matrix3d rot = toward_center(b, eye);
    CHECK(mean_abs_diff(s1.render(eye, rot).intensity, s2.render(eye + d, rot).intensity) <= 5e-3);
  }
  // Crossing the quadrant seams is continuous as well.
  const Eigen::Matrix3d rot = toward_center(b, {0, 0, -0.01});
  CHECK(mean_abs_diff(s1.render({-step / 2, -step / 2, -0.01}, rot).intensity,
                      s2.render({step / 2, step / 2, -0.01}, rot).intensity) <= 5e-3);
}

TEST_CASE("frames are identical for any worker count") {
  const SceneBundle& b = two_plane();
  const auto path = benchmark_path(b, 6);
  Synthesizer one(b, {1}), three(b, {3}), eight(b, {8});
  for (const Pose& p : path) {
    const Frame& a = one.render(p.eye, p.rotation);
    CHECK(three.render(p.eye, p.rotation).intensity == a.intensity);
    CHECK(eight.render(p.eye, p.rotation).intensity == a.intensity);
    CHECK(eight.render(p.eye, p.rotation).covered == a.covered);
  }
}

TEST_CASE("benchmark path and report") {
  const SceneBundle& b = plane();
  CHECK(benchmark(b, 0).frames == 0);
  CHECK(benchmark(b, 0).samples_ms.empty());
  CHECK(benchmark_path(b, 0).empty());

  const auto path = benchmark_path(b, 120);
  REQUIRE(path.size() == 120);
  for (const Pose& p : path) {
    CHECK(b.head.contains(p.eye));
    CHECK((p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  }
  CHECK(path.front().eye.z() == 0.0);
  CHECK(path.back().eye.z() == doctest::Approx(-1.35 * b.rig.r_w));
  CHECK(path.back().eye.head<2>().norm() == doctest::Approx(0.0));
  CHECK(path[15].eye.y() == doctest::Approx(0.9 * b.rig.r_h / 4));

  const TimingReport r = benchmark(b, 5);
  CHECK(r.frames == 5);
  CHECK(r.samples_ms.size() == 5);
  CHECK(r.p99_ms >= r.median_ms);
}

TEST_CASE("timing summary") {
  const TimingReport r = summarize({4, 1, 3, 2});
  CHECK(r.mean_ms == 2.5);
  CHECK(r.median_ms == 2.5);
  CHECK(r.p99_ms == 4);
  std::vector<double> many(200);
  for (std::size_t i = 0; i < many.size(); ++i) many[i] = static_cast<double>(i + 1);
  CHECK(summarize(many).p99_ms == 198);
}

TEST_CASE("empty bundle is rejected") {
  const SceneBundle empty;
  CHECK_THROWS_AS(Synthesizer{empty}, Error);
}
