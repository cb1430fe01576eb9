#include "parallax/scene.hpp"

namespace parallax {

HeadVolume HeadVolume::from_rig(double r_w, double r_h) {
  HeadVolume h;
  h.lo = {-r_w / 4.0, -r_h / 4.0, -1.5 * r_w};
  h.hi = {r_w / 4.0, r_h / 4.0, 0.0};
  return h;
}

void SceneBundle::validate() const {
  const int w = gds[0].width(), h = gds[0].height();
  if (w <= 0 || h <= 0) throw Error("bundle has an empty reference image");
  for (const auto& gd : gds) {
    if (gd.width() != w || gd.height() != h) throw Error("bundle images differ in size");
    if (!gd.hole_free()) throw Error("bundle image has holes");
  }
  if (rig.views[0].position != Eigen::Vector3d::Zero() || rig.views[0].rotation != Eigen::Matrix3d::Identity())
    throw Error("reference view must sit at the origin");
  for (const auto& v : rig.views) {
    v.validate();
    if (v.width != w || v.height != h) throw Error("camera size differs from images");
  }
  for (const auto& k : known)
    if (!k.empty() && (k.width() != w || k.height() != h)) throw Error("known mask differs from images");
  if (!(head == HeadVolume::from_rig(rig.r_w, rig.r_h))) throw Error("head volume inconsistent with rig");
}

SceneBundle make_bundle(const geometry::QuadRig& rig, std::array<GDImage, 5> gds, Provenance provenance) {
  SceneBundle b{rig, HeadVolume::from_rig(rig.r_w, rig.r_h), std::move(gds), std::move(provenance), {}};
  b.validate();
  return b;
}

}  // namespace parallax
