// SPDX-License-Identifier: Apache-2.0
#include "vo/core/se3.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace vo {

Se3 Se3::exp(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const double theta = phi.norm();
  const Mat3 W = hat(phi);

  Mat3 R, V;
  if (theta < 1e-10) {
    R = Mat3::Identity() + W + 0.5 * W * W;
    V = Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    R = Mat3::Identity() + (s / theta) * W +
        ((1.0 - c) / (theta * theta)) * W * W;
    V = Mat3::Identity() + ((1.0 - c) / (theta * theta)) * W +
        ((theta - s) / (theta * theta * theta)) * W * W;
  }
  return Se3(R, V * rho);
}

Vec6 Se3::log() const {
  const double cos_theta = std::min(1.0, std::max(-1.0, (R_.trace() - 1.0) * 0.5));
  const double theta = std::acos(cos_theta);

  Vec3 phi;
  if (theta < 1e-10) {
    phi = Vec3((R_(2, 1) - R_(1, 2)) * 0.5, (R_(0, 2) - R_(2, 0)) * 0.5,
               (R_(1, 0) - R_(0, 1)) * 0.5);
  } else if (theta > M_PI - 1e-6) {
    // near pi: extract axis from the symmetric part
    const Mat3 S = 0.5 * (R_ + Mat3::Identity());
    Vec3 axis(std::sqrt(std::max(0.0, S(0, 0))),
              std::sqrt(std::max(0.0, S(1, 1))),
              std::sqrt(std::max(0.0, S(2, 2))));
    int k = 0;
    if (axis.y() > axis.x()) k = 1;
    if (axis.z() > axis[k]) k = 2;
    if (k == 0) {
      axis.y() = std::copysign(axis.y(), S(0, 1));
      axis.z() = std::copysign(axis.z(), S(0, 2));
    } else if (k == 1) {
      axis.x() = std::copysign(axis.x(), S(0, 1));
      axis.z() = std::copysign(axis.z(), S(1, 2));
    } else {
      axis.x() = std::copysign(axis.x(), S(0, 2));
      axis.y() = std::copysign(axis.y(), S(1, 2));
    }
    phi = theta * axis.normalized();
  } else {
    const double f = theta / (2.0 * std::sin(theta));
    phi = f * Vec3(R_(2, 1) - R_(1, 2), R_(0, 2) - R_(2, 0),
                   R_(1, 0) - R_(0, 1));
  }

  const Mat3 W = hat(phi);
  Mat3 V_inv;
  if (theta < 1e-10) {
    V_inv = Mat3::Identity() - 0.5 * W + (1.0 / 12.0) * W * W;
  } else {
    const double half = 0.5 * theta;
    const double cot_half = std::cos(half) / std::sin(half);
    V_inv = Mat3::Identity() - 0.5 * W +
            ((1.0 - half * cot_half) / (theta * theta)) * W * W;
  }

  Vec6 xi;
  xi.head<3>() = V_inv * t_;
  xi.tail<3>() = phi;
  return xi;
}

Se3 Se3::from_quaternion(double qx, double qy, double qz, double qw,
                         const Vec3& t) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  q.normalize();
  return Se3(q.toRotationMatrix(), t);
}

void Se3::orthonormalize() {
  Eigen::JacobiSVD<Mat3> svd(R_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Mat3 D = Mat3::Identity();
    D(2, 2) = -1.0;
    R = svd.matrixU() * D * svd.matrixV().transpose();
  }
  R_ = R;
}

double Se3::rotation_angle() const {
  return std::acos(std::min(1.0, std::max(-1.0, (R_.trace() - 1.0) * 0.5)));
}

}  // namespace vo
