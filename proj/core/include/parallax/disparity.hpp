#pragma once

#include "parallax/rectify.hpp"
#include "parallax/types.hpp"

namespace parallax::disparity {

struct DisparityConfig {
  int max_disp = 96;         // search range [0, max_disp] at full resolution
  int patch = 9;             // odd window side
  int levels = 3;            // pyramid levels, coarsest first
  int vertical_slack = 2;    // ± rows searched at full resolution
  double lr_tolerance = 1.0; // left-right consistency bound, pixels
  int max_fill = 48;         // longest invalid run filled by background extension
  double min_texture = 2e-3; // windows flatter than this (std) are not matched
  double min_score = 0.5;    // best correlation below this leaves the pixel unmatched
  int median_radius = 2;     // median over checked disparities, 0 disables
  int smooth_radius = 2;     // mean over neighbours within smooth_range, 0 disables
  double smooth_range = 0.5; // px; neighbours further off in disparity are ignored
};

/// Horizontal displacement x_left - x_right per left pixel.
struct DisparityMap {
  Raster<float> data;
  Mask valid;   // passed the left-right check
  Mask filled;  // assigned by background extension, not verified
  double d_max = 0.0;

  int width() const { return data.width(); }
  int height() const { return data.height(); }
  /// valid or filled
  bool usable(int x, int y) const { return valid.at(x, y) || filled.at(x, y); }
};

/// Coarse-to-fine NCC block matching with a narrow vertical search, sub-pixel
/// refinement, left-right consistency, a median over the checked values and
/// background hole extension. Only the horizontal component is reported.
/// Masks may be empty (all valid).
DisparityMap dense_disparity(const ImageGray& left, const Mask& left_valid, const ImageGray& right,
                             const Mask& right_valid, const DisparityConfig& cfg = {});
DisparityMap dense_disparity(const rectify::RectifiedPair& pair, const DisparityConfig& cfg = {});

/// Raw one-direction match (no consistency check or fill). sign = +1 matches
/// left→right (candidate x - d), sign = -1 matches right→left (x + d).
struct RawMatch {
  Raster<float> disparity;
  Raster<std::int8_t> dy;
  Mask ok;
};
RawMatch match_one_way(const ImageGray& ref, const Mask& ref_valid, const ImageGray& other,
                       const Mask& other_valid, int sign, const DisparityConfig& cfg);

inline constexpr double kZeroDisparity = 0.25;

struct StereoDepth {
  DepthMap depth;
  Mask far_clamped;  // disparity <= kZeroDisparity, depth clamped
};

/// depth = focal * baseline / d; near-zero disparities get the far clamp
/// focal * baseline / kZeroDisparity. Usable (valid or filled) pixels become
/// valid depth.
StereoDepth disparity_to_depth(const DisparityMap& disp, double focal, double baseline);

}  // namespace parallax::disparity
