#pragma once

// Scene bundles assembled with the library's own stages, for tests of the
// stages downstream of them (rendering, storage, CLI).

#include "parallax/scene.hpp"
#include "parallax/types.hpp"

namespace parallax::testing {

/// Reference camera with the principal point at the image centre.
CameraView centred_view(int width, int height, double focal);

/// Single fronto-parallel plane at `depth`; corners see only the plane.
SceneBundle plane_bundle(int width, int height, double depth = 3.0, double focal = 110.0, double d_max = 200.0);

/// Foreground rectangle over a background plane; corners have inpainted strips.
SceneBundle two_plane_bundle(int width, int height, double r = 0.05);

}  // namespace parallax::testing
