#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "parallax/ingest.hpp"
#include "parallax/types.hpp"

namespace parallax::rectify {

using ingest::PointMatch;

/// Rank-2 fundamental matrix with unit Frobenius norm. Convention:
/// x_rightᵀ · m · x_left = 0.
struct FundamentalMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

struct RansacConfig {
  double threshold_px = 1.5;  // Sampson distance
  int max_iterations = 2000;
  double confidence = 0.999;
  double min_inlier_ratio = 0.3;
  std::uint64_t seed = 0;
};

struct FundamentalEstimate {
  FundamentalMatrix f;
  std::vector<std::size_t> inliers;  // indices into the input matches
};

/// First-order geometric (Sampson) distance of a correspondence, in pixels.
double sampson_distance(const Eigen::Matrix3d& f, const Eigen::Vector2d& left, const Eigen::Vector2d& right);

/// Hartley-normalised linear eight-point fit over all given matches with the
/// rank-2 constraint enforced. Needs at least 8 matches.
FundamentalMatrix fit_fundamental(std::span<const PointMatch> matches);

/// Random-sample consensus over eight-point fits, refined on the final inlier
/// set. Throws Error on < 8 matches or Error("degenerate geometry") when the
/// inlier ratio stays below cfg.min_inlier_ratio.
FundamentalEstimate estimate_fundamental(std::span<const PointMatch> matches, const RansacConfig& cfg = {});

struct ImageSize {
  int width = 0;
  int height = 0;
};

struct Principals {
  Eigen::Vector2d left;
  Eigen::Vector2d right;
};

struct RectifyOptions {
  /// Longer side of the rectified canvas. 0 keeps the area of the left image.
  int max_size = 0;
};

/// Source-to-rectified homographies plus the shared output canvas.
struct Homographies {
  Eigen::Matrix3d left = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d right = Eigen::Matrix3d::Identity();
  int width = 0;
  int height = 0;
};

/// Loop-Zhang rectification: each homography is shear · similarity ·
/// projective, with the projective parts chosen to minimise distortion and
/// both epipoles sent to infinity along x. When principal points are given,
/// the right image is translated so both principal points share one column.
/// Throws Error("epipole in view") or Error("near-singular decomposition").
Homographies loop_zhang_rectify(const FundamentalMatrix& f, ImageSize left, ImageSize right,
                                const std::optional<Principals>& principal = std::nullopt,
                                const RectifyOptions& opts = {});

struct RectifiedPair {
  ImageGray left;
  ImageGray right;
  Mask left_valid;
  Mask right_valid;
  Eigen::Matrix3d h_left = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d h_right = Eigen::Matrix3d::Identity();
  double focal = 0.0;
  double baseline = 1.0;
  double disparity_offset = 0.0;
  Eigen::Vector2d principal = Eigen::Vector2d::Zero();  // rectified left image
  double min_disparity = 0.0;                           // over inliers, after offset
  double max_disparity = 0.0;
};

/// Applies a homography to a pixel position.
Eigen::Vector2d apply_h(const Eigen::Matrix3d& h, const Eigen::Vector2d& p);

/// Bilinear warp into a width × height canvas; pixels mapping outside the
/// source are left invalid.
void warp_bilinear(const ImageGray& src, const Eigen::Matrix3d& h, int width, int height, ImageGray& out,
                   Mask& valid);

/// Warps both images and shifts the right one so the smallest inlier
/// disparity (x_left - x_right) is zero when it would otherwise be negative.
/// `principal_left` is carried into rectified coordinates.
RectifiedPair apply_and_offset(const ImageGray& left, const ImageGray& right, const Homographies& h,
                               std::span<const PointMatch> inliers,
                               const Eigen::Vector2d& principal_left);

/// Focal length in pixels for a 45 degree vertical field of view.
double infer_intrinsics(int height);

}  // namespace parallax::rectify
