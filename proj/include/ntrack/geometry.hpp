#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace ntrack {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws kInvalidInput unless fx, fy > 0 and cx, cy are finite.
  void validate() const;
};

/// Per-pixel depth in meters. A zero (or otherwise non-positive or
/// non-finite) depth is stored as invalid; arithmetic never reads the
/// depth of an invalid pixel.
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return depth_.size(); }

  double depth(int x, int y) const { return depth_[index(x, y)]; }
  bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }
  double depth(std::size_t i) const { return depth_[i]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }

  /// Sets the depth; values that are not finite and positive mark the pixel
  /// invalid.
  void set(int x, int y, double d);
  void set(std::size_t i, double d);

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const DepthImage&, const DepthImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> depth_;
  std::vector<std::uint8_t> valid_;
};

/// Dense camera-frame 3D points with a validity mask.
class PointImage {
 public:
  PointImage() = default;
  PointImage(int width, int height);

  /// Back-projects every valid depth pixel.
  static PointImage from_depth(const DepthImage& depth,
                               const CameraIntrinsics& camera);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return points_.size(); }

  const Vec3& point(std::size_t i) const { return points_[i]; }
  const Vec3& point(int x, int y) const { return points_[index(x, y)]; }
  bool valid(std::size_t i) const { return valid_[i] != 0; }
  bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }

  void set(std::size_t i, const Vec3& p) {
    points_[i] = p;
    valid_[i] = 1;
  }
  void invalidate(std::size_t i) {
    points_[i].setZero();
    valid_[i] = 0;
  }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  Vec2 pixel(std::size_t i) const {
    return {static_cast<double>(i % static_cast<std::size_t>(width_)),
            static_cast<double>(i / static_cast<std::size_t>(width_))};
  }
  std::size_t valid_count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Vec3> points_;
  std::vector<std::uint8_t> valid_;
};

/// Per-pixel ground-truth 3D displacement between two frames.
struct SceneFlow {
  int width = 0;
  int height = 0;
  std::vector<Vec3> flow;
  std::vector<std::uint8_t> valid;

  SceneFlow() = default;
  SceneFlow(int w, int h)
      : width(w), height(h),
        flow(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), Vec3::Zero()),
        valid(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}
};

/// ((u.x - cx) d / fx, (u.y - cy) d / fy, d). Throws kInvalidInput for a
/// non-positive or non-finite depth.
Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& c);

/// Sub-pixel projection. Throws kBehindCamera when p.z <= 0.
Vec2 project(const Vec3& p, const CameraIntrinsics& c);

/// d project / d p. Throws kBehindCamera when p.z <= 0.
Mat23 project_jacobian(const Vec3& p, const CameraIntrinsics& c);

struct PointSample {
  Vec3 point = Vec3::Zero();
  bool valid = false;
};

/// Sample together with its derivative with respect to the sampling
/// location (columns: d/dx, d/dy).
struct PointSampleGrad {
  Vec3 point = Vec3::Zero();
  Eigen::Matrix<double, 3, 2> dloc = Eigen::Matrix<double, 3, 2>::Zero();
  bool valid = false;
};

/// Bilinear interpolation of the four surrounding pixels. Invalid when the
/// location leaves [0, W-1] x [0, H-1] or any pixel with non-zero weight is
/// invalid.
PointSample bilinear_sample(const PointImage& img, const Vec2& loc);

/// As bilinear_sample, plus the spatial derivative. On grid lines the
/// derivative of the left (upper-index-minus-one) cell is used.
PointSampleGrad bilinear_sample_grad(const PointImage& img, const Vec2& loc);

}  // namespace ntrack
