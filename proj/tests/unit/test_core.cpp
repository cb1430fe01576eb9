#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "parallax/normalize.hpp"
#include "parallax/types.hpp"

using namespace parallax;

namespace {

DepthMap row_depth(const std::vector<double>& d) {
  const int n = static_cast<int>(d.size());
  return DepthMap(Raster<double>(n, 1, d), Mask(n, 1, 1));
}

NormalizedInverseDepth row_nid(const std::vector<double>& v, double lo, double hi, bool degenerate = false) {
  NormalizedInverseDepth nid;
  const int n = static_cast<int>(v.size());
  nid.values = Raster<double>(n, 1, v);
  nid.valid = Mask(n, 1, 1);
  nid.d_min = lo;
  nid.d_max_inv = hi;
  nid.degenerate = degenerate;
  return nid;
}

}  // namespace

TEST_CASE("normalize examples") {
  const auto nid = normalize_inverse_depth(row_depth({1, 2, 4}));
  CHECK(nid.d_min == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(nid.d_max_inv == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_FALSE(nid.degenerate);
  CHECK(std::abs(nid.values[0] - 1.0) < 1e-12);
  CHECK(std::abs(nid.values[1] - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs(nid.values[2]) < 1e-12);

  const auto flat = normalize_inverse_depth(row_depth({3, 3, 3}));
  CHECK(flat.degenerate);
  for (std::size_t i = 0; i < 3; ++i) CHECK(flat.values[i] == 0.0);

  const auto one = normalize_inverse_depth(row_depth({2}));
  CHECK(one.degenerate);
  CHECK(one.values[0] == 0.0);
}

TEST_CASE("normalize ignores invalid pixels and rejects an empty map") {
  Mask valid(3, 1, 1);
  valid[1] = 0;
  const DepthMap d(Raster<double>(3, 1, std::vector<double>{1, 0, 4}), valid);
  const auto nid = normalize_inverse_depth(d);
  CHECK(nid.d_min == 0.25);
  CHECK(nid.d_max_inv == 1.0);
  CHECK(nid.values[1] == 0.0);
  CHECK(nid.valid[1] == 0);

  const DepthMap none(Raster<double>(2, 2, 0.0), Mask(2, 2, 0));
  CHECK_THROWS_WITH_AS(normalize_inverse_depth(none), "empty depth", Error);
}

TEST_CASE("denormalize examples") {
  const auto d = denormalize(row_nid({1.0, 1.0 / 3.0, 0.0}, 0.25, 1.0));
  CHECK(std::abs(d.at(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(d.at(1, 0) - 2.0) < 1e-12);
  CHECK(std::abs(d.at(2, 0) - 4.0) < 1e-12);

  const auto flat = denormalize(row_nid({0, 0}, 0.5, 0.5, true));
  CHECK(flat.at(0, 0) == 2.0);
  CHECK(flat.at(1, 0) == 2.0);

  const auto single = denormalize(row_nid({0.5}, 0.2, 0.6));
  CHECK(std::abs(single.at(0, 0) - 2.5) < 1e-12);
}

TEST_CASE("denormalize rejects bad ranges") {
  CHECK_THROWS_AS(denormalize(row_nid({0}, std::nan(""), 1.0)), Error);
  CHECK_THROWS_AS(denormalize(row_nid({0}, 0.1, INFINITY)), Error);
  CHECK_THROWS_AS(denormalize(row_nid({0}, 0.0, 1.0)), Error);
  CHECK_THROWS_AS(denormalize(row_nid({0}, 0.5, 0.2)), Error);
}

TEST_CASE("normalize round trip and ordering on random maps") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> depth(0.3, 80.0);
  std::bernoulli_distribution keep(0.85);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = 17 + trial % 5, h = 9 + trial % 3;
    Raster<double> d(w, h, 0.0);
    Mask m(w, h, 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (keep(rng) || i == 0) {
        m[i] = 1;
        d[i] = depth(rng);
      }
    }
    const DepthMap in(d, m);
    const auto nid = normalize_inverse_depth(in);
    const auto back = denormalize(nid);
    CHECK(back.valid() == m);
    double worst = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!m[i]) continue;
      worst = std::max(worst, std::abs(back.depth()[i] - d[i]) / d[i]);
      CHECK(nid.values[i] >= 0.0);
      CHECK(nid.values[i] <= 1.0);
    }
    CHECK(worst <= 1e-6);

    const auto again = normalize_inverse_depth(back);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (m[i]) CHECK(std::abs(again.values[i] - nid.values[i]) <= 1e-6);

    // Deeper means strictly smaller.
    for (std::size_t i = 1; i < d.size(); ++i) {
      if (!m[i] || !m[i - 1] || d[i] == d[i - 1]) continue;
      CHECK((d[i] > d[i - 1]) == (nid.values[i] < nid.values[i - 1]));
    }
  }
}

TEST_CASE("raster and GD construction checks") {
  CHECK_THROWS(Raster<float>(-1, 2));
  CHECK_THROWS(Raster<float>(2, 2, std::vector<float>(3)));
  Raster<int> r(3, 2, 0);
  r.at(2, 1) = 5;
  CHECK(r[5] == 5);
  CHECK(r.contains(2, 1));
  CHECK_FALSE(r.contains(3, 0));

  const DepthMap good(Raster<double>(4, 3, 2.0), Mask(4, 3, 1));
  CHECK(good.valid_count() == 12);
  CHECK_THROWS(DepthMap(Raster<double>(4, 3, 2.0), Mask(3, 4, 1)));
  CHECK_THROWS(DepthMap(Raster<double>(2, 1, std::vector<double>{1.0, -1.0}), Mask(2, 1, 1)));

  const GDImage gd(ImageGray(4, 3, 0.5f), good);
  CHECK(gd.hole_free());
  CHECK_THROWS(GDImage(ImageGray(3, 3, 0.5f), good));
  CHECK_THROWS(check_intensity(ImageGray(4, 3, 1.5f)));
  CHECK_THROWS(check_intensity(ImageGray(4, 3, NAN)));
  CHECK_NOTHROW(check_intensity(ImageGray(4, 3, 1.0f)));
}

TEST_CASE("camera views") {
  CameraView cam;
  cam.focal = 100;
  cam.principal = {50, 40};
  cam.width = 100;
  cam.height = 80;
  CHECK_NOTHROW(cam.validate());

  const Eigen::Vector3d p = cam.unproject(70, 20, 3.0);
  const Eigen::Vector2d px = cam.project(p);
  CHECK(std::abs(px.x() - 70) < 1e-12);
  CHECK(std::abs(px.y() - 20) < 1e-12);
  CHECK(p.x() > 0);
  CHECK(p.y() > 0);  // rows go down, +y up
  CHECK(p.z() == -3.0);

  CameraView bad = cam;
  bad.focal = 0;
  CHECK_THROWS(bad.validate());
  bad = cam;
  bad.rotation(0, 0) = -1;  // reflection
  CHECK_THROWS(bad.validate());
  bad = cam;
  bad.rotation *= 2.0;
  CHECK_THROWS(bad.validate());

  const Eigen::Matrix3d r = look_at({1, 2, 3}, {0, 0, -5}, Eigen::Vector3d::UnitY());
  const Eigen::Vector3d axis = -r.col(2);
  const Eigen::Vector3d want = (Eigen::Vector3d(0, 0, -5) - Eigen::Vector3d(1, 2, 3)).normalized();
  CHECK((axis - want).norm() < 1e-12);
  CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
  CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() < 1e-12);
}
