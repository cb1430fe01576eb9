#pragma once

// Files holding intermediate stage outputs next to a record, so each stage
// can be re-run on its own. Every file is written deterministically.

#include <filesystem>

#include "parallax/disparity.hpp"
#include "parallax/ingest.hpp"
#include "parallax/rectify.hpp"

namespace parallax::sidecar {

/// match.json: counts, verdict, reason and every ratio-test match.
void save_matches(const std::filesystem::path& file, const ingest::MatchReport& report);
ingest::MatchReport load_matches(const std::filesystem::path& file);

/// rectify.json plus left/right images (16-bit png) and validity masks.
void save_rectified(const std::filesystem::path& dir, const rectify::RectifiedPair& pair);
rectify::RectifiedPair load_rectified(const std::filesystem::path& dir);

struct DisparityResult {
  disparity::DisparityMap disparity;
  disparity::StereoDepth depth;
  double focal = 0.0;
  double baseline = 1.0;
};

/// disparity.json plus raw little-endian disparity (float32) and depth
/// (float64) rasters, masks as png and an 8-bit preview.
void save_disparity(const std::filesystem::path& dir, const DisparityResult& r);
DisparityResult load_disparity(const std::filesystem::path& dir);

}  // namespace parallax::sidecar
