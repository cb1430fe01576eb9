#include "parallax/types.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/LU>

namespace parallax {

void check_intensity(const ImageGray& image) {
  for (float v : image.pixels()) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
      throw std::invalid_argument("intensity outside [0, 1]");
  }
}

DepthMap::DepthMap(Raster<double> depth, Mask valid)
    : depth_(std::move(depth)), valid_(std::move(valid)) {
  if (!depth_.same_shape(valid_)) throw std::invalid_argument("depth and mask dimensions differ");
  for (std::size_t i = 0; i < depth_.size(); ++i) {
    if (valid_[i]) {
      if (!std::isfinite(depth_[i]) || depth_[i] <= 0.0)
        throw std::invalid_argument("valid depth must be positive and finite");
    } else {
      depth_[i] = 0.0;
    }
  }
}

std::size_t DepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count_if(valid_.data().begin(), valid_.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

GDImage::GDImage(ImageGray intensity, DepthMap depth)
    : intensity_(std::move(intensity)), depth_(std::move(depth)) {
  if (intensity_.width() != depth_.width() || intensity_.height() != depth_.height())
    throw std::invalid_argument("GD intensity and depth dimensions differ");
}

bool GDImage::hole_free() const {
  const auto& v = valid().data();
  return std::all_of(v.begin(), v.end(), [](std::uint8_t m) { return m != 0; });
}

void CameraView::validate() const {
  if (!(focal > 0.0) || !std::isfinite(focal)) throw std::invalid_argument("camera focal must be positive");
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("camera rotation is not a proper rotation");
}

Eigen::Matrix3d look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d x_axis = forward.cross(up);
  if (x_axis.norm() < 1e-12) throw std::invalid_argument("look_at: up is parallel to view direction");
  x_axis.normalize();
  const Eigen::Vector3d z_axis = -forward;
  const Eigen::Vector3d y_axis = z_axis.cross(x_axis);
  Eigen::Matrix3d r;
  r.col(0) = x_axis;
  r.col(1) = y_axis;
  r.col(2) = z_axis;
  return r;
}

}  // namespace parallax
