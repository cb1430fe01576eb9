#include "raster.hpp"

#include <algorithm>
#include <cmath>

namespace parallax::raster {

namespace {

inline std::int32_t ceil_px(std::int32_t v) { return (v + kSubOne - 1) >> kSubBits; }
inline std::int32_t floor_px(std::int32_t v) { return v >> kSubBits; }

}  // namespace

void project(const geometry::DepthMesh& mesh, const CameraView& cam, Projected& out, std::size_t begin,
             std::size_t end) {
  const Eigen::Matrix3d rt = cam.rotation.transpose();
  const Eigen::Vector3d t = -rt * cam.position;
  const double f = cam.focal, cx = cam.principal.x(), cy = cam.principal.y();
  const double xlo = -kGuardBand, xhi = cam.width + kGuardBand;
  const double ylo = -kGuardBand, yhi = cam.height + kGuardBand;
  const double r00 = rt(0, 0), r01 = rt(0, 1), r02 = rt(0, 2), r10 = rt(1, 0), r11 = rt(1, 1), r12 = rt(1, 2),
               r20 = rt(2, 0), r21 = rt(2, 1), r22 = rt(2, 2), t0 = t.x(), t1 = t.y(), t2 = t.z();
  // Rounds to nearest by truncating a value shifted to be positive; the
  // guard band keeps every accepted coordinate above -kBias.
  constexpr double kBias = 1 << 23;
  const Eigen::Vector3d* pos = mesh.positions.data();
  const float* intensity = mesh.intensity.data();
  Vertex* vert = out.v.data();
  for (std::size_t i = begin; i < end; ++i) {
    const double wx = pos[i].x(), wy = pos[i].y(), wz = pos[i].z();
    const double d = -(r20 * wx + r21 * wy + r22 * wz + t2);
    const double iz = 1.0 / d;
    const double sx = cx + f * (r00 * wx + r01 * wy + r02 * wz + t0) * iz;
    const double sy = cy - f * (r10 * wx + r11 * wy + r12 * wz + t1) * iz;
    if (!(d > kNear) || !(sx > xlo && sx < xhi && sy > ylo && sy < yhi)) {
      vert[i] = {0, 0, 0.0f, 0.0f};
      continue;
    }
    vert[i] = {static_cast<std::int32_t>(static_cast<std::int64_t>(sx * kSubOne + (kBias + 0.5)) -
                                         static_cast<std::int64_t>(kBias)),
               static_cast<std::int32_t>(static_cast<std::int64_t>(sy * kSubOne + (kBias + 0.5)) -
                                         static_cast<std::int64_t>(kBias)),
               static_cast<float>(iz), static_cast<float>(intensity[i] * iz)};
  }
}

RowSpan triangle_rows(const Projected& p, const std::array<std::uint32_t, 3>& tri, int height) {
  const Vertex &a = p.v[tri[0]], &b = p.v[tri[1]], &c = p.v[tri[2]];
  if (!(a.iz > 0.0f) || !(b.iz > 0.0f) || !(c.iz > 0.0f)) return {};
  const std::int32_t y0 = std::min({a.y, b.y, c.y});
  const std::int32_t y1 = std::max({a.y, b.y, c.y});
  const int r0 = std::max(0, ceil_px(y0));
  const int r1 = std::min(height, floor_px(y1) + 1);
  return r0 < r1 ? RowSpan{r0, r1} : RowSpan{};
}

void draw(const Projected& p, const std::array<std::uint32_t, 3>* tris, std::size_t count,
          const std::uint32_t* order, int row0, int row1, Target& t) {
  const int w = t.width;
  float* const zbuf = t.inv_depth.data();
  float* const abuf = t.intensity.data();
  const Vertex* const vert = p.v.data();

  for (std::size_t n = 0; n < count; ++n) {
    const auto& tri = tris[order ? order[n] : n];
    const Vertex* v0 = &vert[tri[0]];
    const Vertex* v1 = &vert[tri[1]];
    const Vertex* v2 = &vert[tri[2]];
    if (!(v0->iz > 0.0f) || !(v1->iz > 0.0f) || !(v2->iz > 0.0f)) continue;
    const std::int32_t ix0 = v0->x, iy0 = v0->y, ix1 = v1->x, iy1 = v1->y, ix2 = v2->x, iy2 = v2->y;

    // Bounding box in whole pixels, clipped to the viewport and band.
    const int py0 = std::max(row0, ceil_px(std::min(std::min(iy0, iy1), iy2)));
    const int py1 = std::min(row1 - 1, floor_px(std::max(std::max(iy0, iy1), iy2)));
    if (py0 > py1) continue;
    const int px0 = std::max(0, ceil_px(std::min(std::min(ix0, ix1), ix2)));
    const int px1 = std::min(w - 1, floor_px(std::max(std::max(ix0, ix1), ix2)));
    if (px0 > px1) continue;
    std::int64_t x0 = ix0, y0 = iy0, x1 = ix1, y1 = iy1, x2 = ix2, y2 = iy2;

    std::int64_t area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
    if (area == 0) continue;
    if (area < 0) {
      std::swap(v1, v2);
      std::swap(x1, x2);
      std::swap(y1, y2);
      area = -area;
    }
    // Edge functions at the first pixel centre and their per-pixel steps.
    const std::int64_t sx = static_cast<std::int64_t>(px0) << kSubBits;
    const std::int64_t sy = static_cast<std::int64_t>(py0) << kSubBits;
    std::int64_t r12 = (x2 - x1) * (sy - y1) - (y2 - y1) * (sx - x1);
    std::int64_t r20 = (x0 - x2) * (sy - y2) - (y0 - y2) * (sx - x2);
    std::int64_t r01 = (x1 - x0) * (sy - y0) - (y1 - y0) * (sx - x0);
    const std::int64_t dx12 = -(y2 - y1) * kSubOne, dy12 = (x2 - x1) * kSubOne;
    const std::int64_t dx20 = -(y0 - y2) * kSubOne, dy20 = (x0 - x2) * kSubOne;
    const std::int64_t dx01 = -(y1 - y0) * kSubOne, dy01 = (x1 - x0) * kSubOne;

    const float inv_area = 1.0f / static_cast<float>(area);
    const float z0 = v0->iz, z1 = v1->iz, z2 = v2->iz;
    const float a0 = v0->a_iz, a1 = v1->a_iz, a2 = v2->a_iz;

    for (int py = py0; py <= py1; ++py) {
      std::int64_t e12 = r12, e20 = r20, e01 = r01;
      const std::size_t row = static_cast<std::size_t>(py) * static_cast<std::size_t>(w);
      for (int px = px0; px <= px1; ++px) {
        if ((e12 | e20 | e01) >= 0) {
          const float l0 = static_cast<float>(e12) * inv_area;
          const float l1 = static_cast<float>(e20) * inv_area;
          const float l2 = static_cast<float>(e01) * inv_area;
          const float iz = l0 * z0 + l1 * z1 + l2 * z2;
          const std::size_t idx = row + static_cast<std::size_t>(px);
          if (iz > zbuf[idx]) {
            zbuf[idx] = iz;
            abuf[idx] = (l0 * a0 + l1 * a1 + l2 * a2) / iz;
          }
        }
        e12 += dx12;
        e20 += dx20;
        e01 += dx01;
      }
      r12 += dy12;
      r20 += dy20;
      r01 += dy01;
    }
  }
}

}  // namespace parallax::raster
