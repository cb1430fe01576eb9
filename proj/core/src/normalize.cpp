#include "parallax/normalize.hpp"

#include <cmath>
#include <limits>

namespace parallax {

NormalizedInverseDepth normalize_inverse_depth(const DepthMap& depth) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const auto& d = depth.depth();
  const auto& valid = depth.valid();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!valid[i]) continue;
    const double inv = 1.0 / d[i];
    lo = std::min(lo, inv);
    hi = std::max(hi, inv);
  }
  if (!std::isfinite(lo)) throw Error("empty depth");

  NormalizedInverseDepth out;
  out.values = Raster<double>(depth.width(), depth.height(), 0.0);
  out.valid = valid;
  out.d_min = lo;
  out.d_max_inv = hi;
  out.degenerate = !(hi > lo);
  if (out.degenerate) return out;

  const double range = hi - lo;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (valid[i]) out.values[i] = (1.0 / d[i] - lo) / range;
  }
  return out;
}

DepthMap denormalize(const NormalizedInverseDepth& nid) {
  if (!std::isfinite(nid.d_min) || !std::isfinite(nid.d_max_inv))
    throw Error("non-finite inverse depth range");
  if (!(nid.d_min > 0.0) || nid.d_max_inv < nid.d_min)
    throw Error("invalid inverse depth range");
  if (!nid.values.same_shape(nid.valid)) throw std::invalid_argument("nid mask dimensions differ");

  const double range = nid.degenerate ? 0.0 : nid.d_max_inv - nid.d_min;
  Raster<double> depth(nid.width(), nid.height(), 0.0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (nid.valid[i]) depth[i] = 1.0 / (nid.d_min + nid.values[i] * range);
  }
  return DepthMap(std::move(depth), nid.valid);
}

}  // namespace parallax
