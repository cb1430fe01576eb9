#include "parallax/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "raster.hpp"

namespace parallax::geometry {

double rig_half_extent(double d_max, double baseline) {
  if (!(d_max > 0)) throw std::invalid_argument("d_max must be positive");
  return (96.0 * baseline / d_max) * (std::numbers::sqrt2 / 2.0);
}

double median_inverse_depth(const DepthMap& depth) {
  std::vector<double> inv;
  inv.reserve(depth.valid_count());
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.valid_at(x, y)) inv.push_back(1.0 / depth.at(x, y));
  if (inv.empty()) throw Error("empty depth");
  const std::size_t mid = inv.size() / 2;
  std::nth_element(inv.begin(), inv.begin() + static_cast<std::ptrdiff_t>(mid), inv.end());
  const double upper = inv[mid];
  if (inv.size() % 2 == 1) return upper;
  const double lower = *std::max_element(inv.begin(), inv.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

QuadRig make_rig(const CameraView& cam, const Eigen::Vector3d& center, double r_w, double r_h) {
  QuadRig rig;
  rig.center = center;
  rig.r_w = r_w;
  rig.r_h = r_h;
  rig.up = cam.rotation.col(1);
  rig.views[0] = cam;
  const double sx[4] = {-1, 1, -1, 1};
  const double sy[4] = {1, 1, -1, -1};
  for (int i = 0; i < 4; ++i) {
    CameraView v = cam;
    v.position = cam.camera_to_world({sx[i] * r_w, sy[i] * r_h, 0.0});
    v.rotation = look_at(v.position, center, rig.up);
    rig.views[static_cast<std::size_t>(i + 1)] = v;
  }
  return rig;
}

QuadRig compute_rig(const DepthMap& ref_depth, double d_max, double baseline, const CameraView& cam) {
  const double r = rig_half_extent(d_max, baseline);
  const double m = median_inverse_depth(ref_depth);
  return make_rig(cam, cam.camera_to_world({0.0, 0.0, -1.0 / m}), r, r);
}

bool straddles(double a, double b) { return std::abs(a - b) / std::min(a, b) > kTriangleThreshold; }

Mask small_regions(const DepthMap& depth, std::size_t min_pixels) {
  const int w = depth.width(), h = depth.height();
  Mask out(w, h, 0);
  Mask seen(w, h, 0);
  std::vector<std::size_t> comp;
  for (std::size_t start = 0; start < out.size(); ++start) {
    if (seen[start] || !depth.valid()[start]) continue;
    comp.assign(1, start);
    seen[start] = 1;
    for (std::size_t k = 0; k < comp.size(); ++k) {
      const int x = static_cast<int>(comp[k] % static_cast<std::size_t>(w));
      const int y = static_cast<int>(comp[k] / static_cast<std::size_t>(w));
      const double d = depth.at(x, y);
      constexpr int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int n = 0; n < 4; ++n) {
        const int nx = x + dx[n], ny = y + dy[n];
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = depth.valid().index(nx, ny);
        if (seen[j] || !depth.valid()[j] || straddles(d, depth.depth()[j])) continue;
        seen[j] = 1;
        comp.push_back(j);
      }
    }
    if (comp.size() < min_pixels)
      for (std::size_t i : comp) out[i] = 1;
  }
  return out;
}

DepthMesh depth_to_mesh(const GDImage& gd, const CameraView& cam) {
  const int w = gd.width(), h = gd.height();
  const DepthMap& depth = gd.depth();
  std::vector<std::int32_t> index(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
  DepthMesh mesh;
  const std::size_t n = depth.valid_count();
  mesh.positions.reserve(n);
  mesh.intensity.reserve(n);
  mesh.source.reserve(n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!depth.valid_at(x, y)) continue;
      index[depth.depth().index(x, y)] = static_cast<std::int32_t>(mesh.positions.size());
      mesh.positions.push_back(cam.camera_to_world(cam.unproject(x, y, depth.at(x, y))));
      mesh.intensity.push_back(gd.intensity().at(x, y));
      mesh.source.emplace_back(x, y);
    }

  const auto keep = [&](int ax, int ay, int bx, int by, int cx, int cy) {
    const double a = depth.at(ax, ay), b = depth.at(bx, by), c = depth.at(cx, cy);
    return !straddles(a, b) && !straddles(b, c) && !straddles(a, c);
  };
  mesh.triangles.reserve(2 * n);
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      const std::int32_t a = index[depth.depth().index(x, y)];
      const std::int32_t b = index[depth.depth().index(x + 1, y)];
      const std::int32_t c = index[depth.depth().index(x, y + 1)];
      const std::int32_t d = index[depth.depth().index(x + 1, y + 1)];
      if (a < 0 || b < 0 || c < 0 || d < 0) continue;
      if (keep(x, y, x + 1, y, x, y + 1))
        mesh.triangles.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                                  static_cast<std::uint32_t>(c)});
      if (keep(x + 1, y, x + 1, y + 1, x, y + 1))
        mesh.triangles.push_back({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(d),
                                  static_cast<std::uint32_t>(c)});
    }
  if (mesh.triangles.empty()) throw Error("degenerate mesh");
  return mesh;
}

namespace {

GDImage to_gd(const raster::Target& t) {
  ImageGray intensity(t.width, t.height, 0.0f);
  Raster<double> depth(t.width, t.height, 0.0);
  Mask valid(t.width, t.height, 0);
  for (std::size_t i = 0; i < t.inv_depth.size(); ++i) {
    if (!(t.inv_depth[i] > 0.0f)) continue;
    intensity[i] = std::clamp(t.intensity[i], 0.0f, 1.0f);
    depth[i] = 1.0 / static_cast<double>(t.inv_depth[i]);
    valid[i] = 1;
  }
  return GDImage(std::move(intensity), DepthMap(std::move(depth), std::move(valid)));
}

}  // namespace

GDImage render(const DepthMesh& mesh, const CameraView& cam) {
  raster::Projected p;
  p.resize(mesh.vertex_count());
  raster::project(mesh, cam, p, 0, mesh.vertex_count());
  raster::Target t;
  t.reset(cam.width, cam.height);
  raster::draw(p, mesh.triangles.data(), mesh.triangles.size(), nullptr, 0, cam.height, t);
  return to_gd(t);
}

namespace {

// Replicates the outermost rows and columns `pad` times so that resampling
// in the intermediate view does not eat into the source footprint.
std::pair<GDImage, CameraView> pad_replicate(const GDImage& gd, const CameraView& cam, int pad) {
  const int w = gd.width(), h = gd.height();
  ImageGray intensity(w + 2 * pad, h + 2 * pad);
  Raster<double> depth(w + 2 * pad, h + 2 * pad, 0.0);
  Mask valid(w + 2 * pad, h + 2 * pad, 0);
  for (int y = 0; y < h + 2 * pad; ++y)
    for (int x = 0; x < w + 2 * pad; ++x) {
      const int sx = std::clamp(x - pad, 0, w - 1), sy = std::clamp(y - pad, 0, h - 1);
      if (!gd.valid_at(sx, sy)) continue;
      intensity.at(x, y) = gd.intensity().at(sx, sy);
      depth.at(x, y) = gd.depth().at(sx, sy);
      valid.at(x, y) = 1;
    }
  CameraView padded = cam;
  padded.width = w + 2 * pad;
  padded.height = h + 2 * pad;
  padded.principal += Eigen::Vector2d(pad, pad);
  return {GDImage(std::move(intensity), DepthMap(std::move(depth), std::move(valid))), padded};
}

}  // namespace

Mask double_reproject(const GDImage& gd, const CameraView& cam, const CameraView& target) {
  const auto [padded, padded_cam] = pad_replicate(gd, cam, 2);
  const DepthMesh mesh = depth_to_mesh(padded, padded_cam);

  // Widen the intermediate canvas to hold the whole projected mesh.
  CameraView wide = target;
  double x0 = 0, y0 = 0, x1 = target.width - 1, y1 = target.height - 1;
  for (const auto& pos : mesh.positions) {
    const Eigen::Vector3d c = target.world_to_camera(pos);
    if (!(-c.z() > raster::kNear)) continue;
    const Eigen::Vector2d px = target.project(c);
    x0 = std::min(x0, px.x());
    x1 = std::max(x1, px.x());
    y0 = std::min(y0, px.y());
    y1 = std::max(y1, px.y());
  }
  const double cap = std::max(target.width, target.height);
  const int ml = static_cast<int>(std::ceil(std::min(cap, -x0))) + 1;
  const int mr = static_cast<int>(std::ceil(std::min(cap, x1 - (target.width - 1)))) + 1;
  const int mt = static_cast<int>(std::ceil(std::min(cap, -y0))) + 1;
  const int mb = static_cast<int>(std::ceil(std::min(cap, y1 - (target.height - 1)))) + 1;
  wide.width = target.width + ml + mr;
  wide.height = target.height + mt + mb;
  wide.principal += Eigen::Vector2d(ml, mt);

  const GDImage there = render(mesh, wide);
  const GDImage back = render(depth_to_mesh(there, wide), cam);

  // Re-meshing drops the sub-pixel sliver at every depth edge, so a lost
  // pixel is a hole only if the target really occludes it: all four
  // intermediate samples around its projection (floor and ceil per axis)
  // are nearer surfaces.
  const auto occluded = [&](int x, int y) {
    const Eigen::Vector3d c = wide.world_to_camera(cam.camera_to_world(cam.unproject(x, y, gd.depth().at(x, y))));
    const double d = -c.z();
    if (!(d > raster::kNear)) return false;
    const Eigen::Vector2d px = wide.project(c);
    const int us[2] = {static_cast<int>(std::floor(px.x())), static_cast<int>(std::ceil(px.x()))};
    const int vs[2] = {static_cast<int>(std::floor(px.y())), static_cast<int>(std::ceil(px.y()))};
    for (const int v : vs)
      for (const int u : us) {
        if (!there.intensity().contains(u, v) || !there.valid_at(u, v)) return false;
        const double s = there.depth().at(u, v);
        if (!(s < d) || !straddles(s, d)) return false;
      }
    return true;
  };
  Mask holes(gd.width(), gd.height(), 0);
  for (int y = 0; y < gd.height(); ++y)
    for (int x = 0; x < gd.width(); ++x)
      holes.at(x, y) = gd.valid_at(x, y) && !back.valid_at(x, y) && occluded(x, y);
  return holes;
}

BoundaryMask boundary_mask(const GDImage& gd, const Mask& holes) {
  const int w = gd.width(), h = gd.height();
  if (!holes.same_shape(gd.intensity())) throw std::invalid_argument("boundary_mask: mask dimensions differ");
  BoundaryMask out(w, h, 0);
  const auto usable = [&](int x, int y) { return gd.valid_at(x, y) && !holes.at(x, y); };

  // 4-connected hole components.
  std::vector<std::int32_t> label(holes.size(), -1);
  std::vector<std::pair<int, int>> stack;
  std::vector<std::pair<int, int>> comp;
  std::vector<std::uint8_t> ring;
  std::vector<std::uint8_t> tmp;
  std::vector<double> values;
  std::int32_t next = 0;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (!holes.at(sx, sy) || label[holes.index(sx, sy)] >= 0) continue;
      comp.clear();
      stack.assign(1, {sx, sy});
      label[holes.index(sx, sy)] = next;
      int bx0 = sx, bx1 = sx, by0 = sy, by1 = sy;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        comp.emplace_back(x, y);
        bx0 = std::min(bx0, x);
        bx1 = std::max(bx1, x);
        by0 = std::min(by0, y);
        by1 = std::max(by1, y);
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (!holes.contains(nx[k], ny[k]) || !holes.at(nx[k], ny[k])) continue;
          auto& l = label[holes.index(nx[k], ny[k])];
          if (l >= 0) continue;
          l = next;
          stack.emplace_back(nx[k], ny[k]);
        }
      }

      // Chebyshev dilation of the component over its padded bounding box.
      const int r = kBoundaryRing;
      const int ox = std::max(0, bx0 - r), oy = std::max(0, by0 - r);
      const int lw = std::min(w - 1, bx1 + r) - ox + 1, lh = std::min(h - 1, by1 + r) - oy + 1;
      const auto li = [&](int x, int y) { return static_cast<std::size_t>(y - oy) * lw + (x - ox); };
      tmp.assign(static_cast<std::size_t>(lw) * lh, 0);
      ring.assign(tmp.size(), 0);
      for (const auto& [x, y] : comp) tmp[li(x, y)] = 1;
      std::vector<std::uint8_t> rows(tmp.size(), 0);
      for (int y = oy; y < oy + lh; ++y)
        for (int x = ox; x < ox + lw; ++x) {
          if (!tmp[li(x, y)]) continue;
          for (int xx = std::max(ox, x - r); xx <= std::min(ox + lw - 1, x + r); ++xx) rows[li(xx, y)] = 1;
        }
      for (int y = oy; y < oy + lh; ++y)
        for (int x = ox; x < ox + lw; ++x) {
          if (!rows[li(x, y)]) continue;
          for (int yy = std::max(oy, y - r); yy <= std::min(oy + lh - 1, y + r); ++yy) ring[li(x, yy)] = 1;
        }
      values.clear();
      for (int y = oy; y < oy + lh; ++y)
        for (int x = ox; x < ox + lw; ++x)
          if (ring[li(x, y)] && usable(x, y)) values.push_back(1.0 / gd.depth().at(x, y));
      if (values.empty()) {
        ++next;
        continue;
      }
      std::sort(values.begin(), values.end());
      const std::size_t m = values.size() / 2;
      const double median = values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);

      for (const auto& [x, y] : comp) {
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (!holes.contains(nx[k], ny[k]) || !usable(nx[k], ny[k])) continue;
          if (1.0 / gd.depth().at(nx[k], ny[k]) >= kBoundaryRatio * median) out.at(nx[k], ny[k]) = 1;
        }
      }
      ++next;
    }
  return out;
}

}  // namespace parallax::geometry
