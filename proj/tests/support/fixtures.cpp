#include "fixtures.hpp"

#include "parallax/geometry.hpp"
#include "parallax/inpaint.hpp"
#include "synthetic.hpp"

namespace parallax::testing {

namespace {

SceneBundle assemble(const GDImage& ref, const geometry::QuadRig& rig) {
  const auto corners = inpaint::corner_gds(ref, rig);
  std::array<GDImage, 5> gds{ref, corners[0].gd, corners[1].gd, corners[2].gd, corners[3].gd};
  Provenance p{"fixture", "test", nlohmann::json::object()};
  return make_bundle(rig, std::move(gds), std::move(p));
}

}  // namespace

CameraView centred_view(int width, int height, double focal) {
  CameraView v;
  v.focal = focal;
  v.width = width;
  v.height = height;
  v.principal = {0.5 * (width - 1), 0.5 * (height - 1)};
  return v;
}

SceneBundle plane_bundle(int width, int height, double depth, double focal, double d_max) {
  const GDImage gd = plane_gd(width, height, depth);
  const CameraView cam = centred_view(width, height, focal);
  return assemble(gd, geometry::compute_rig(gd.depth(), d_max, 1.0, cam));
}

SceneBundle two_plane_bundle(int width, int height, double r) {
  const GDImage gd = two_plane_gd(width, height, width * 2 / 5, width * 13 / 20, height * 5 / 16, height * 11 / 16,
                                  1.0, 2.0);
  const CameraView cam = centred_view(width, height, 1.5 * width);
  return assemble(gd, geometry::make_rig(cam, {0, 0, -1.5}, r, r));
}

}  // namespace parallax::testing
