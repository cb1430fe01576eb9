#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace parallax {

/// Error raised by pipeline stages. what() carries a short reason such as
/// "empty depth" or "disjoint crops" that is stable enough to match on.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& reason) : std::runtime_error(reason) {}
};

/// Dense row-major raster. Pixel (x, y) lives at data[y * width + x].
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative raster size");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative raster size");
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw std::invalid_argument("raster data length does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  bool same_shape(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Raster&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// 1 = set / valid, 0 = clear / hole.
using Mask = Raster<std::uint8_t>;

/// Grayscale intensities in [0, 1].
using ImageGray = Raster<float>;

/// Throws if any intensity is non-finite or outside [0, 1].
void check_intensity(const ImageGray& image);

/// Positive scene depths plus a validity mask. Invalid pixels hold 0 and are
/// never interpreted as depth.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(Raster<double> depth, Mask valid);

  int width() const { return depth_.width(); }
  int height() const { return depth_.height(); }
  const Raster<double>& depth() const { return depth_; }
  const Mask& valid() const { return valid_; }
  bool valid_at(int x, int y) const { return valid_.at(x, y) != 0; }
  double at(int x, int y) const { return depth_.at(x, y); }
  std::size_t valid_count() const;

 private:
  Raster<double> depth_;
  Mask valid_;
};

/// Inverse depth affinely mapped to [0, 1] over the valid pixels:
/// value = (1/D - d_min) / (d_max_inv - d_min).
struct NormalizedInverseDepth {
  Raster<double> values;
  Mask valid;
  double d_min = 0.0;      // min inverse depth over valid pixels
  double d_max_inv = 0.0;  // max inverse depth over valid pixels
  bool degenerate = false; // d_max_inv == d_min, every value is 0

  int width() const { return values.width(); }
  int height() const { return values.height(); }
};

/// Aligned intensity and depth rasters sharing one validity mask.
class GDImage {
 public:
  GDImage() = default;
  GDImage(ImageGray intensity, DepthMap depth);

  int width() const { return intensity_.width(); }
  int height() const { return intensity_.height(); }
  const ImageGray& intensity() const { return intensity_; }
  const DepthMap& depth() const { return depth_; }
  const Mask& valid() const { return depth_.valid(); }
  bool valid_at(int x, int y) const { return depth_.valid_at(x, y); }
  bool hole_free() const;

 private:
  ImageGray intensity_;
  DepthMap depth_;
};

/// Valid pixels sitting on the foreground side of a hole.
using BoundaryMask = Mask;

/// Pinhole camera looking down its local -z axis, +y up, image rows going
/// down. rotation maps camera axes to world axes (columns are the camera
/// x, y, z axes expressed in world coordinates).
struct CameraView {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double focal = 1.0;
  Eigen::Vector2d principal = Eigen::Vector2d::Zero();
  int width = 0;
  int height = 0;

  /// Throws unless rotation is orthonormal with det +1 and focal > 0.
  void validate() const;

  Eigen::Vector3d world_to_camera(const Eigen::Vector3d& world) const {
    return rotation.transpose() * (world - position);
  }
  Eigen::Vector3d camera_to_world(const Eigen::Vector3d& local) const {
    return rotation * local + position;
  }
  /// Camera-frame point for pixel (u, v) at axial depth `depth`.
  Eigen::Vector3d unproject(double u, double v, double depth) const {
    return {(u - principal.x()) * depth / focal, -(v - principal.y()) * depth / focal, -depth};
  }
  /// Pixel coordinates of a camera-frame point (requires z < 0).
  Eigen::Vector2d project(const Eigen::Vector3d& local) const {
    const double d = -local.z();
    return {principal.x() + focal * local.x() / d, principal.y() - focal * local.y() / d};
  }
};

/// Camera at `position` with its optical axis (-z) aimed at `target`.
Eigen::Matrix3d look_at(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up);

}  // namespace parallax
