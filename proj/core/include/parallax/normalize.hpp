#pragma once

#include "parallax/types.hpp"

namespace parallax {

/// Maps valid depths to normalized inverse depth. A constant-depth map yields
/// all zeros with `degenerate` set. Throws Error("empty depth") when no pixel
/// is valid.
NormalizedInverseDepth normalize_inverse_depth(const DepthMap& depth);

/// Inverse of normalize_inverse_depth on valid pixels.
DepthMap denormalize(const NormalizedInverseDepth& nid);

}  // namespace parallax
