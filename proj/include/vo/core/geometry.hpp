// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "vo/core/camera.hpp"
#include "vo/core/errors.hpp"
#include "vo/core/image.hpp"
#include "vo/core/se3.hpp"
#include "vo/core/types.hpp"

namespace vo {

// Perspective projection of a camera-frame point. Throws on z <= 0.
inline Vec2 project(const CameraIntrinsics& cam, const Vec3& X) {
  if (!(X.z() > 0)) throw NonPositiveDepth("projected point has non-positive depth");
  return Vec2(cam.fx * X.x() / X.z() + cam.cx, cam.fy * X.y() / X.z() + cam.cy);
}

// Back-projection: pixel plus depth to a camera-frame point.
inline Vec3 unproject(const CameraIntrinsics& cam, const Vec2& p, double depth) {
  if (!(depth > 0)) throw NonPositiveDepth("depth must be positive");
  return depth * cam.ray(p);
}

struct WarpResult {
  Vec2 pixel;       // target-image coordinates
  Vec3 point;       // point in the target camera frame
  bool in_front;    // positive depth in the target frame
  bool in_bounds;   // pixel inside the target image
};

// Warps pixel p with depth d from the source frame into the target frame.
// T_ts maps source-frame points into the target frame.
inline WarpResult warp_pixel(const CameraIntrinsics& cam, const Vec2& p,
                             double depth, const Se3& T_ts) {
  WarpResult r;
  r.point = T_ts * unproject(cam, p, depth);
  r.in_front = r.point.z() > 0;
  if (r.in_front) {
    r.pixel = project(cam, r.point);
    r.in_bounds = cam.contains(r.pixel);
  } else {
    r.pixel = Vec2(-1, -1);
    r.in_bounds = false;
  }
  return r;
}

template <typename T>
struct SampleResult {
  T value{};
  bool valid = false;
};

inline double value_of(double x) { return x; }

// Bilinear sample at continuous (x, y); center of pixel (i, j) is (x=j, y=i).
// Valid only when all four neighbours are inside the image. Templated so the
// same code path runs on forward-mode dual numbers.
template <typename Scalar>
SampleResult<Scalar> sample_bilinear_t(const Image& img, const Scalar& x,
                                       const Scalar& y) {
  using std::floor;
  SampleResult<Scalar> out;
  const double x0d = floor(value_of(x));
  const double y0d = floor(value_of(y));
  if (!(x0d >= 0 && y0d >= 0 && x0d <= img.width() - 2 &&
        y0d <= img.height() - 2))
    return out;
  const int x0 = static_cast<int>(x0d), y0 = static_cast<int>(y0d);
  const Scalar ax = x - x0d;
  const Scalar ay = y - y0d;
  const double v00 = img.at(x0, y0), v01 = img.at(x0 + 1, y0);
  const double v10 = img.at(x0, y0 + 1), v11 = img.at(x0 + 1, y0 + 1);
  out.value = (1.0 - ay) * ((1.0 - ax) * v00 + ax * v01) +
              ay * ((1.0 - ax) * v10 + ax * v11);
  out.valid = true;
  return out;
}

inline SampleResult<double> sample_bilinear(const Image& img, double x,
                                            double y) {
  return sample_bilinear_t<double>(img, x, y);
}

// d/dx and d/dy of the bilinear interpolant at (x, y); valid with the same
// bounds rule as sample_bilinear.
struct SampleGrad {
  double value = 0, dx = 0, dy = 0;
  bool valid = false;
};

inline SampleGrad sample_bilinear_grad(const Image& img, double x, double y) {
  SampleGrad out;
  const double x0d = std::floor(x), y0d = std::floor(y);
  if (!(x0d >= 0 && y0d >= 0 && x0d <= img.width() - 2 &&
        y0d <= img.height() - 2))
    return out;
  const int x0 = static_cast<int>(x0d), y0 = static_cast<int>(y0d);
  const double ax = x - x0, ay = y - y0;
  const double v00 = img.at(x0, y0), v01 = img.at(x0 + 1, y0);
  const double v10 = img.at(x0, y0 + 1), v11 = img.at(x0 + 1, y0 + 1);
  out.value = (1.0 - ay) * ((1.0 - ax) * v00 + ax * v01) +
              ay * ((1.0 - ax) * v10 + ax * v11);
  out.dx = (1.0 - ay) * (v01 - v00) + ay * (v11 - v10);
  out.dy = (1.0 - ax) * (v10 - v00) + ax * (v11 - v01);
  out.valid = true;
  return out;
}

}  // namespace vo
