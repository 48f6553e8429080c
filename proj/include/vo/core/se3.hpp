// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Geometry>

#include "vo/core/types.hpp"

namespace vo {

// Rigid transform X' = R X + t. Rotation is stored as a matrix; quaternion
// conversion happens only at I/O boundaries.
class Se3 {
 public:
  Se3() : R_(Mat3::Identity()), t_(Vec3::Zero()) {}
  Se3(const Mat3& R, const Vec3& t) : R_(R), t_(t) {}

  static Se3 identity() { return Se3(); }

  // Exponential map of se(3); xi = [rho, phi] (translation part first).
  static Se3 exp(const Vec6& xi);
  Vec6 log() const;

  static Se3 from_quaternion(double qx, double qy, double qz, double qw,
                             const Vec3& t);
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(R_); }

  const Mat3& rotation() const { return R_; }
  const Vec3& translation() const { return t_; }
  Vec3& translation() { return t_; }

  Se3 inverse() const { return Se3(R_.transpose(), -(R_.transpose() * t_)); }

  Se3 operator*(const Se3& o) const {
    return Se3(R_ * o.R_, R_ * o.t_ + t_);
  }

  Vec3 operator*(const Vec3& x) const { return R_ * x + t_; }

  // Projects the rotation block back onto SO(3) (nearest orthonormal matrix).
  void orthonormalize();

  // max-norm of R^T R - I
  double orthonormality_error() const {
    return ((R_.transpose() * R_) - Mat3::Identity()).cwiseAbs().maxCoeff();
  }

  double rotation_angle() const;

  static Mat3 hat(const Vec3& w) {
    Mat3 m;
    m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
    return m;
  }

 private:
  Mat3 R_;
  Vec3 t_;
};

}  // namespace vo
