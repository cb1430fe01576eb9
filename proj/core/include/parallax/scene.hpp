#pragma once

#include <array>
#include <string>

#include <json.hpp>

#include "parallax/geometry.hpp"
#include "parallax/types.hpp"

namespace parallax {

/// Box of allowed eye positions, in the reference camera frame:
/// [-rw/4, rw/4] x [-rh/4, rh/4] x [-1.5 rw, 0].
struct HeadVolume {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();

  static HeadVolume from_rig(double r_w, double r_h);
  Eigen::Vector3d clamp(const Eigen::Vector3d& eye) const { return eye.cwiseMax(lo).cwiseMin(hi); }
  bool contains(const Eigen::Vector3d& eye) const {
    return (eye.array() >= lo.array()).all() && (eye.array() <= hi.array()).all();
  }
  bool operator==(const HeadVolume&) const = default;
};

struct Provenance {
  std::string record_id;
  std::string pipeline_version;
  nlohmann::json parameters = nlohmann::json::object();
};

/// Reference GD plus four corner GDs and the rig they were rendered from.
struct SceneBundle {
  geometry::QuadRig rig;
  HeadVolume head;
  std::array<GDImage, 5> gds;
  Provenance provenance;
  /// Optional per-GD M masks (1 = rendered, 0 = inpainted); empty when unknown.
  std::array<Mask, 5> known;

  /// Throws Error unless all five GDs are hole-free with equal dimensions,
  /// the reference view is at the origin with identity rotation and the
  /// head volume matches the rig.
  void validate() const;
};

/// Assembles a bundle, deriving the head volume from the rig.
SceneBundle make_bundle(const geometry::QuadRig& rig, std::array<GDImage, 5> gds, Provenance provenance = {});

}  // namespace parallax
