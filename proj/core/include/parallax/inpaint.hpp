#pragma once

#include <array>
#include <memory>

#include "parallax/geometry.hpp"
#include "parallax/types.hpp"

namespace parallax::inpaint {

inline constexpr double kLambdaHole = 6.0;
inline constexpr double kLambdaTv = 0.1;

/// Masked inputs of an inpainter. `known` is M: 1 = known pixel, 0 = hole.
/// The intensity, inverse-depth and boundary channels are zero on holes.
struct InpaintRequest {
  ImageGray intensity_masked;
  NormalizedInverseDepth nid_masked;
  BoundaryMask boundary_masked;
  Mask known;
};

/// Builds a request from unmasked channels, zeroing every hole pixel.
InpaintRequest make_request(const ImageGray& intensity, const NormalizedInverseDepth& nid,
                            const BoundaryMask& boundary, const Mask& known);

struct InpaintResult {
  ImageGray intensity;
  NormalizedInverseDepth nid;  // every pixel valid
  bool foreground_sealed = false;  // some hole had no background source
  int sweeps = 0;                  // smoothing sweeps after the initial fill

  /// Hole-free GD image (depth from the stored inverse-depth range).
  GDImage gd() const;
};

class Inpainter {
 public:
  virtual ~Inpainter() = default;
  virtual InpaintResult inpaint(const InpaintRequest& req) const = 0;
};

/// Joint intensity / inverse-depth diffusion. An onion-peel pass gives every
/// hole pixel the mean of its already-filled 4-neighbours, then raster
/// sweeps relax the fill until the largest update is below 1e-6 or
/// width + height sweeps have run. When guided, boundary pixels never act as
/// sources; a hole with no other source falls back to unguided filling.
class DiffusionInpainter : public Inpainter {
 public:
  explicit DiffusionInpainter(bool guided = true) : guided_(guided) {}
  InpaintResult inpaint(const InpaintRequest& req) const override;

 private:
  bool guided_;
};

InpaintResult inpaint_gd(const InpaintRequest& req, bool guided = true);

struct InpaintMetrics {
  double l_valid = 0.0;
  double l_hole = 0.0;
  double tv_term = 0.0;
  double total = 0.0;
  static constexpr double lambda_hole = kLambdaHole;
  static constexpr double lambda_tv = kLambdaTv;
};

/// Mean absolute inverse-depth error over known and hole pixels plus total
/// variation of the composite (prediction in holes, truth elsewhere) masked
/// by M. TV is the mean absolute forward difference over horizontal pairs
/// plus the same over vertical pairs. Empty sets contribute 0.
InpaintMetrics depth_loss(const NormalizedInverseDepth& pred, const NormalizedInverseDepth& truth,
                          const Mask& known);

struct IntensityLoss {
  double l_valid = 0.0;
  double l_hole = 0.0;
};
IntensityLoss intensity_loss(const ImageGray& pred, const ImageGray& truth, const Mask& known);

/// Per-corner output of the reprojection + inpainting stage.
struct CornerGD {
  GDImage gd;                 // hole-free
  Mask known;                 // M of the rendered view: 1 = rendered, 0 = filled
  std::size_t hole_pixels = 0;
  std::size_t boundary_pixels = 0;
  bool foreground_sealed = false;
};

/// Renders the reference mesh at each corner view, marks holes and
/// boundaries, inpaints in normalised inverse depth and converts back.
/// `ref_gd` must be hole-free.
std::array<CornerGD, 4> corner_gds(const GDImage& ref_gd, const geometry::QuadRig& rig,
                                   const Inpainter& inpainter);
std::array<CornerGD, 4> corner_gds(const GDImage& ref_gd, const geometry::QuadRig& rig);

}  // namespace parallax::inpaint
