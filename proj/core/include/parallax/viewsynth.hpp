#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "parallax/scene.hpp"
#include "parallax/types.hpp"

namespace parallax::viewsynth {

/// Relative depth window inside which surfaces from different GDs blend.
inline constexpr double kBlendTolerance = 0.01;

struct SynthConfig {
  unsigned workers = 1;  // tile workers; 1 renders on the calling thread
};

struct Frame {
  ImageGray intensity;
  Mask covered;  // 0 where no GD reaches the pixel
};

/// Blend weights of the five GDs for an eye position (x, y only): the
/// reference gets (1 - a)(1 - b) with a = |x|/rw, b = |y|/rh; the corner in
/// the eye's quadrant gets ab; a(1 - b) is shared by the two corners on the
/// eye's x side and (1 - a)b by the two on its y side.
std::array<double, 5> blend_weights(const geometry::QuadRig& rig, const Eigen::Vector3d& eye);

/// Per-pixel compositing: GDs whose inverse depth is within kBlendTolerance
/// (relative depth) of the nearest one contribute; their weights are
/// renormalised, or made uniform when they are all zero. Non-contributors
/// get 0. Returns the number of contributors (0 for an uncovered pixel).
int contributor_weights(const std::array<double, 5>& weights, const std::array<float, 5>& inv_depth,
                        std::array<double, 5>& out);

/// Renders novel views of one bundle. Meshes are built once; buffers are
/// reused across frames, so a Synthesizer is not safe for concurrent
/// render() calls (use one per thread). The bundle must outlive it.
class Synthesizer {
 public:
  explicit Synthesizer(const SceneBundle& bundle, SynthConfig cfg = {});
  ~Synthesizer();
  Synthesizer(const Synthesizer&) = delete;
  Synthesizer& operator=(const Synthesizer&) = delete;

  /// Eye in the reference frame, clamped into the head volume. `rotation`
  /// is camera-to-world for the output view; intrinsics follow the reference.
  const Frame& render(const Eigen::Vector3d& eye, const Eigen::Matrix3d& rotation);

  CameraView view_for(const Eigen::Vector3d& eye, const Eigen::Matrix3d& rotation) const;
  const SceneBundle& bundle() const { return bundle_; }

 private:
  struct Impl;
  const SceneBundle& bundle_;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper.
Frame synthesize(const SceneBundle& bundle, const Eigen::Vector3d& eye, const Eigen::Matrix3d& rotation,
                 SynthConfig cfg = {});

struct Pose {
  Eigen::Vector3d eye;
  Eigen::Matrix3d rotation;
};

/// Fixed path: the first half of the frames circle the head volume at 90%
/// of its x/y extent in the z = 0 plane, the rest dolly forward to
/// 0.9 * 1.5 rw. Every pose looks at the scene centre.
std::vector<Pose> benchmark_path(const SceneBundle& bundle, std::size_t n_frames);

struct TimingReport {
  std::size_t frames = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p99_ms = 0.0;
  std::vector<double> samples_ms;
};

/// Wall-clock per frame along benchmark_path. 0 frames gives an empty report.
TimingReport benchmark(const SceneBundle& bundle, std::size_t n_frames, SynthConfig cfg = {});

/// Summary statistics of a list of frame times (p99 by nearest rank).
TimingReport summarize(std::vector<double> samples_ms);

}  // namespace parallax::viewsynth
