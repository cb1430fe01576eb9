#pragma once

// Internal fixed-point triangle rasteriser shared by geometry::render and the
// view synthesiser.

#include <cstdint>
#include <vector>

#include "parallax/geometry.hpp"

namespace parallax::raster {

inline constexpr int kSubBits = 8;
inline constexpr std::int32_t kSubOne = 1 << kSubBits;
inline constexpr double kGuardBand = 8192.0;  // pixels beyond the viewport
inline constexpr double kNear = 1e-6;

/// Screen-space vertex. x/y are fixed point; iz is 1/depth; a_iz is
/// intensity * iz. iz <= 0 marks an unusable vertex.
struct Vertex {
  std::int32_t x;
  std::int32_t y;
  float iz;
  float a_iz;
};

/// Screen-space vertices for one camera.
struct Projected {
  std::vector<Vertex> v;

  void resize(std::size_t n) { v.resize(n); }
};

/// Inverse-depth and intensity buffers. inv_depth 0 means empty.
struct Target {
  int width = 0;
  int height = 0;
  std::vector<float> inv_depth;
  std::vector<float> intensity;

  void reset(int w, int h) {
    width = w;
    height = h;
    inv_depth.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f);
    intensity.resize(inv_depth.size());
  }
};

void project(const geometry::DepthMesh& mesh, const CameraView& cam, Projected& out, std::size_t begin,
             std::size_t end);

/// Pixel rows [row0, row1) touched by a triangle, empty when unusable.
struct RowSpan {
  int row0 = 0;
  int row1 = 0;
};
RowSpan triangle_rows(const Projected& p, const std::array<std::uint32_t, 3>& tri, int height);

/// Draws triangles (in the given order) clipped to rows [row0, row1).
/// Strict depth test: the first triangle drawn wins exact ties.
void draw(const Projected& p, const std::array<std::uint32_t, 3>* tris, std::size_t count,
          const std::uint32_t* order, int row0, int row1, Target& t);

}  // namespace parallax::raster
