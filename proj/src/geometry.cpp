#include "ntrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ntrack/error.hpp"

namespace ntrack {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kBehindCamera: return "point behind camera";
    case ErrorCode::kEmptyMesh: return "empty mesh";
    case ErrorCode::kUnsupportedPoint: return "unsupported point";
    case ErrorCode::kUnderdetermined: return "underdetermined system";
    case ErrorCode::kSingularSystem: return "singular system";
    case ErrorCode::kDivergence: return "solver divergence";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kGeneration: return "scene generation error";
  }
  return "unknown error";
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::kInvalidInput,
                "intrinsics require fx, fy > 0 and finite cx, cy");
  }
}

DepthImage::DepthImage(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::kInvalidInput, "negative image size");
  }
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  depth_.assign(n, 0.0);
  valid_.assign(n, 0);
}

void DepthImage::set(std::size_t i, double d) {
  if (std::isfinite(d) && d > 0.0) {
    depth_[i] = d;
    valid_[i] = 1;
  } else {
    depth_[i] = 0.0;
    valid_[i] = 0;
  }
}

void DepthImage::set(int x, int y, double d) { set(index(x, y), d); }

PointImage::PointImage(int width, int height) : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::kInvalidInput, "negative image size");
  }
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  points_.assign(n, Vec3::Zero());
  valid_.assign(n, 0);
}

PointImage PointImage::from_depth(const DepthImage& depth,
                                  const CameraIntrinsics& camera) {
  camera.validate();
  PointImage out(depth.width(), depth.height());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth.valid(i)) out.set(i, backproject(out.pixel(i), depth.depth(i), camera));
  }
  return out;
}

std::size_t PointImage::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), 1));
}

Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& c) {
  if (!std::isfinite(depth) || !(depth > 0.0)) {
    throw Error(ErrorCode::kInvalidInput,
                "backproject: depth must be finite and positive, got " +
                    std::to_string(depth));
  }
  return {(pixel.x() - c.cx) * depth / c.fx, (pixel.y() - c.cy) * depth / c.fy,
          depth};
}

Vec2 project(const Vec3& p, const CameraIntrinsics& c) {
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::kBehindCamera, "project: point has z <= 0");
  }
  return {c.fx * p.x() / p.z() + c.cx, c.fy * p.y() / p.z() + c.cy};
}

Mat23 project_jacobian(const Vec3& p, const CameraIntrinsics& c) {
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::kBehindCamera, "project_jacobian: point has z <= 0");
  }
  const double iz = 1.0 / p.z();
  Mat23 j;
  j << c.fx * iz, 0.0, -c.fx * p.x() * iz * iz,
       0.0, c.fy * iz, -c.fy * p.y() * iz * iz;
  return j;
}

namespace {

struct Cell {
  int x0, y0, x1, y1;
  double fx, fy;
};

// Lower corner index for a coordinate in [0, n-1]; grid-line coordinates
// resolve to the cell on their lower side.
void cell_axis(double v, int n, int& i0, int& i1, double& f) {
  if (n == 1) {
    i0 = i1 = 0;
    f = 0.0;
    return;
  }
  i0 = std::clamp(static_cast<int>(std::ceil(v)) - 1, 0, n - 2);
  i1 = i0 + 1;
  f = v - static_cast<double>(i0);
}

bool locate(const PointImage& img, const Vec2& loc, Cell& cell) {
  const double x = loc.x();
  const double y = loc.y();
  if (!std::isfinite(x) || !std::isfinite(y)) return false;
  if (img.width() == 0 || img.height() == 0) return false;
  if (x < 0.0 || y < 0.0 || x > img.width() - 1 || y > img.height() - 1) return false;
  cell_axis(x, img.width(), cell.x0, cell.x1, cell.fx);
  cell_axis(y, img.height(), cell.y0, cell.y1, cell.fy);
  return true;
}

}  // namespace

PointSampleGrad bilinear_sample_grad(const PointImage& img, const Vec2& loc) {
  PointSampleGrad out;
  Cell c{};
  if (!locate(img, loc, c)) return out;

  const int xs[4] = {c.x0, c.x1, c.x0, c.x1};
  const int ys[4] = {c.y0, c.y0, c.y1, c.y1};
  const double w[4] = {(1 - c.fx) * (1 - c.fy), c.fx * (1 - c.fy),
                       (1 - c.fx) * c.fy, c.fx * c.fy};
  Vec3 v[4];
  Vec3 value = Vec3::Zero();
  bool has_zero_weight_invalid = false;
  for (int k = 0; k < 4; ++k) {
    const bool ok = img.valid(xs[k], ys[k]);
    if (w[k] != 0.0) {
      if (!ok) return out;
      value += w[k] * img.point(xs[k], ys[k]);
    }
    if (ok) {
      v[k] = img.point(xs[k], ys[k]);
    } else {
      has_zero_weight_invalid = true;
    }
  }
  if (has_zero_weight_invalid) {
    for (int k = 0; k < 4; ++k) {
      if (!img.valid(xs[k], ys[k])) v[k] = value;
    }
  }
  out.point = value;
  out.valid = true;
  out.dloc.col(0) = (1 - c.fy) * (v[1] - v[0]) + c.fy * (v[3] - v[2]);
  out.dloc.col(1) = (1 - c.fx) * (v[2] - v[0]) + c.fx * (v[3] - v[1]);
  if (img.width() == 1) out.dloc.col(0).setZero();
  if (img.height() == 1) out.dloc.col(1).setZero();
  return out;
}

PointSample bilinear_sample(const PointImage& img, const Vec2& loc) {
  const PointSampleGrad g = bilinear_sample_grad(img, loc);
  return {g.point, g.valid};
}

}  // namespace ntrack
