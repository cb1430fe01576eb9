#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "parallax/types.hpp"

namespace parallax::geometry {

/// Relative depth difference above which a triangle is dropped.
inline constexpr double kTriangleThreshold = 0.1;
/// Boundary-mask ring radius (pixels) and inverse-depth ratio.
inline constexpr int kBoundaryRing = 5;
inline constexpr double kBoundaryRatio = 1.1;

/// Reference view v0 plus four corner views looking at the scene centre.
/// views[1..4] sit at (-rw, rh), (rw, rh), (-rw, -rh), (rw, -rh) in the
/// reference camera's xy plane.
struct QuadRig {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double r_w = 0.0;
  double r_h = 0.0;
  std::array<CameraView, 5> views;
  Eigen::Vector3d up = Eigen::Vector3d::UnitY();
};

/// Half-extent for a 96 px maximum displacement: (96 b / d_max) * sqrt(2)/2.
double rig_half_extent(double d_max, double baseline);

/// Median of the valid inverse depths (mean of the middle pair when even).
double median_inverse_depth(const DepthMap& depth);

/// Rig from the reference depth: centre on the optical axis at
/// 1 / median(1/D), half-extents from rig_half_extent.
/// Throws Error("empty depth") or std::invalid_argument for d_max <= 0.
QuadRig compute_rig(const DepthMap& ref_depth, double d_max, double baseline, const CameraView& cam);

/// Places the corner cameras for a given centre and half-extents. Corner
/// cameras share the reference intrinsics and its up vector.
QuadRig make_rig(const CameraView& cam, const Eigen::Vector3d& center, double r_w, double r_h);

/// Textured triangle mesh in world coordinates, one vertex per valid pixel.
struct DepthMesh {
  std::vector<Eigen::Vector3d> positions;
  std::vector<float> intensity;
  std::vector<Eigen::Vector2d> source;  // pixel the vertex came from
  std::vector<std::array<std::uint32_t, 3>> triangles;

  std::size_t vertex_count() const { return positions.size(); }
};

/// True when |a - b| / min(a, b) exceeds kTriangleThreshold.
bool straddles(double a, double b);

/// Valid pixels whose component is smaller than `min_pixels`, where 4-neighbours
/// connect unless they straddle. Such specks render as cracks.
Mask small_regions(const DepthMap& depth, std::size_t min_pixels);

/// Two triangles per fully valid 2x2 block, dropping those that straddle a
/// depth discontinuity. Throws Error("degenerate mesh") if none survive.
DepthMesh depth_to_mesh(const GDImage& gd, const CameraView& cam);

/// Z-buffered rasterisation with perspective-correct intensity and depth.
/// Uncovered pixels are holes. Depth is the axial distance in `cam`.
GDImage render(const DepthMesh& mesh, const CameraView& cam);

/// Pixels valid in `gd` that do not survive a round trip through `target`:
/// mesh, render at target, re-mesh, render back at `cam`. The intermediate
/// view is widened so only occlusion, not the target frustum, loses pixels.
Mask double_reproject(const GDImage& gd, const CameraView& cam, const CameraView& target);

/// Valid, non-hole pixels 4-adjacent to a hole whose inverse depth is at
/// least kBoundaryRatio times the median inverse depth over the valid
/// non-hole pixels within kBoundaryRing (Chebyshev) of that hole component.
BoundaryMask boundary_mask(const GDImage& gd, const Mask& holes);

}  // namespace parallax::geometry
