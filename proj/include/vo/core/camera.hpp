// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vo/core/errors.hpp"
#include "vo/core/types.hpp"

namespace vo {

// Pinhole camera. Pixel coordinates are continuous; the center of pixel
// (i, j) is at (x=j, y=i).
struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w,
                   int h)
      : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
    validate();
  }

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw NonPositiveInput("focal length must be positive");
    if (width <= 0 || height <= 0) throw NonPositiveInput("image size must be positive");
  }

  Mat3 matrix() const {
    Mat3 K;
    K << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return K;
  }

  // Unit-depth ray through pixel p: K^{-1} [px, py, 1]^T.
  Vec3 ray(const Vec2& p) const {
    return Vec3((p.x() - cx) / fx, (p.y() - cy) / fy, 1.0);
  }

  bool contains(const Vec2& p, double margin = 0.0) const {
    return p.x() >= margin && p.y() >= margin &&
           p.x() <= width - 1 - margin && p.y() <= height - 1 - margin;
  }
};

}  // namespace vo
