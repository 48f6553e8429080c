// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "vo/core/errors.hpp"
#include "vo/core/geometry.hpp"
#include "vo/core/rng.hpp"
#include "vo/pose/pose.hpp"

namespace vo {

namespace {

// Real roots of c4 x^4 + c3 x^3 + c2 x^2 + c1 x + c0 via the companion
// matrix of the monic polynomial.
int quartic_real_roots(double c4, double c3, double c2, double c1, double c0,
                       double roots[4]) {
  const double scale = std::max({std::abs(c4), std::abs(c3), std::abs(c2),
                                 std::abs(c1), std::abs(c0)});
  if (scale <= 0.0 || std::abs(c4) < 1e-14 * scale) return 0;
  Eigen::Matrix4d C = Eigen::Matrix4d::Zero();
  C(1, 0) = 1.0;
  C(2, 1) = 1.0;
  C(3, 2) = 1.0;
  C(0, 3) = -c0 / c4;
  C(1, 3) = -c1 / c4;
  C(2, 3) = -c2 / c4;
  C(3, 3) = -c3 / c4;
  Eigen::EigenSolver<Eigen::Matrix4d> es(C, false);
  int n = 0;
  for (int i = 0; i < 4; ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) < 1e-8 * (1.0 + std::abs(ev.real())))
      roots[n++] = ev.real();
  }
  return n;
}

// Rigid transform (R, t) minimizing sum |R a_i + t - b_i|^2.
bool absolute_orientation(const std::vector<Vec3>& a,
                          const std::vector<Vec3>& b, Mat3* R, Vec3* t) {
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= static_cast<double>(a.size());
  cb /= static_cast<double>(b.size());
  Mat3 H = Mat3::Zero();
  for (size_t i = 0; i < a.size(); ++i)
    H += (a[i] - ca) * (b[i] - cb).transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(1) < 1e-12 * (1.0 + svd.singularValues()(0)))
    return false;  // collinear points do not pin the rotation
  Mat3 D = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0)
    D(2, 2) = -1.0;
  *R = svd.matrixV() * D * svd.matrixU().transpose();
  *t = cb - *R * ca;
  return true;
}

// Camera-frame positions of three world points from their bearing rays.
// Distance-ratio formulation; returns up to 4 candidate poses.
int p3p_solve(const Vec3 P[3], const Vec3 f[3], Se3 poses[4]) {
  const double a = (P[1] - P[2]).norm();
  const double b = (P[0] - P[2]).norm();
  const double c = (P[0] - P[1]).norm();
  if (a < 1e-12 || b < 1e-12 || c < 1e-12) return 0;
  const double ca = f[1].dot(f[2]);
  const double cb = f[0].dot(f[2]);
  const double cg = f[0].dot(f[1]);
  const double A = (a * a) / (b * b);
  const double B = (c * c) / (b * b);

  const double ca2 = ca * ca, cb2 = cb * cb, cg2 = cg * cg;
  const double c4 = A * A - 2 * A * B - 2 * A + B * B - 4 * B * ca2 + 2 * B + 1;
  const double c3 =
      -4 * (A * A * cb - 2 * A * B * cb - A * ca * cg - A * cb + B * B * cb -
            2 * B * ca2 * cb - B * ca * cg + B * cb + ca * cg);
  const double c2 =
      2 * (2 * A * A * cb2 + A * A - 4 * A * B * cb2 - 2 * A * B -
           4 * A * ca * cb * cg - 2 * A * cg2 + 2 * B * B * cb2 + B * B -
           2 * B * ca2 - 4 * B * ca * cb * cg + 2 * ca2 + 2 * cg2 - 1);
  const double c1 =
      -4 * (A * A * cb - 2 * A * B * cb - A * ca * cg - 2 * A * cb * cg2 +
            A * cb + B * B * cb - B * ca * cg - B * cb + ca * cg);
  const double c0 = A * A - 2 * A * B - 4 * A * cg2 + 2 * A + B * B - 2 * B + 1;

  double roots[4];
  const int nr = quartic_real_roots(c4, c3, c2, c1, c0, roots);
  int np = 0;
  for (int i = 0; i < nr; ++i) {
    const double v = roots[i];
    if (v <= 0) continue;
    const double denom = 2.0 * (ca * v - cg);
    if (std::abs(denom) < 1e-12) continue;
    const double u =
        ((B - A + 1) * v * v + 2 * (A - B) * cb * v + (B - A - 1)) / denom;
    if (u <= 0) continue;
    const double norm2 = 1.0 + v * v - 2.0 * v * cb;
    if (norm2 <= 0) continue;
    const double s1 = b / std::sqrt(norm2);
    const double s2 = u * s1;
    const double s3 = v * s1;
    std::vector<Vec3> world = {P[0], P[1], P[2]};
    std::vector<Vec3> cam = {s1 * f[0], s2 * f[1], s3 * f[2]};
    Mat3 R;
    Vec3 t;
    if (!absolute_orientation(world, cam, &R, &t)) continue;
    poses[np++] = Se3(R, t);
  }
  return np;
}

double reproj_error(const CameraIntrinsics& K, const Se3& T, const Vec3& X,
                    const Vec2& pix) {
  const Vec3 Xc = T * X;
  if (Xc.z() <= 1e-12) return 1e30;
  const Vec2 p(K.fx * Xc.x() / Xc.z() + K.cx, K.fy * Xc.y() / Xc.z() + K.cy);
  return (p - pix).norm();
}

int count_pnp_inliers(const CameraIntrinsics& K, const Se3& T,
                      const std::vector<Vec3>& pts,
                      const std::vector<Vec2>& pix, double thr,
                      std::vector<std::uint8_t>* mask) {
  int count = 0;
  if (mask) mask->assign(pts.size(), 0);
  for (size_t i = 0; i < pts.size(); ++i) {
    if (reproj_error(K, T, pts[i], pix[i]) <= thr) {
      ++count;
      if (mask) (*mask)[i] = 1;
    }
  }
  return count;
}

// Gauss-Newton on the reprojection objective with left-multiplied updates.
Se3 refine_pose(const CameraIntrinsics& K, Se3 T,
                const std::vector<Vec3>& pts, const std::vector<Vec2>& pix,
                const std::vector<std::uint8_t>& mask) {
  for (int iter = 0; iter < 20; ++iter) {
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (size_t i = 0; i < pts.size(); ++i) {
      if (!mask[i]) continue;
      const Vec3 Xc = T * pts[i];
      if (Xc.z() <= 1e-12) continue;
      const double iz = 1.0 / Xc.z();
      const Vec2 r(K.fx * Xc.x() * iz + K.cx - pix[i].x(),
                   K.fy * Xc.y() * iz + K.cy - pix[i].y());
      Eigen::Matrix<double, 2, 3> dpi;
      dpi << K.fx * iz, 0, -K.fx * Xc.x() * iz * iz, 0, K.fy * iz,
          -K.fy * Xc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dX;
      dX.leftCols<3>() = Mat3::Identity();
      dX.rightCols<3>() = -Se3::hat(Xc);
      const Eigen::Matrix<double, 2, 6> J = dpi * dX;
      H += J.transpose() * J;
      g += J.transpose() * r;
    }
    H.diagonal().array() += 1e-12;
    const Vec6 delta = H.ldlt().solve(-g);
    T = Se3::exp(delta) * T;
    if (delta.norm() < 1e-12) break;
  }
  return T;
}

}  // namespace

Se3 solve_pnp(const std::vector<Vec3>& points3d,
              const std::vector<Vec2>& pixels, const CameraIntrinsics& K,
              const RansacConfig& cfg) {
  const size_t n = points3d.size();
  if (n != pixels.size())
    throw DimensionMismatch("PnP point and pixel counts differ");
  if (n < 4)
    throw InsufficientCorrespondences("PnP needs at least 4 points");

  std::vector<Vec3> bearings(n);
  for (size_t i = 0; i < n; ++i) bearings[i] = K.ray(pixels[i]).normalized();

  Rng rng(cfg.rng_seed);
  bool have_best = false;
  Se3 best_pose;
  int best_count = 0;
  double needed = cfg.max_iterations;

  int sample[4];
  for (int iter = 0; iter < cfg.max_iterations &&
                     static_cast<double>(iter) < needed;
       ++iter) {
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        sample[k] = rng.uniform_int(0, static_cast<int>(n) - 1);
        fresh = true;
        for (int j = 0; j < k; ++j)
          if (sample[j] == sample[k]) fresh = false;
      } while (!fresh);
    }
    const Vec3 P[3] = {points3d[sample[0]], points3d[sample[1]],
                       points3d[sample[2]]};
    const Vec3 f[3] = {bearings[sample[0]], bearings[sample[1]],
                       bearings[sample[2]]};
    Se3 candidates[4];
    const int nc = p3p_solve(P, f, candidates);
    if (nc == 0) continue;
    // fourth sample point disambiguates the quartic branches
    int pick = 0;
    double pick_err = 1e30;
    for (int c = 0; c < nc; ++c) {
      const double e = reproj_error(K, candidates[c], points3d[sample[3]],
                                    pixels[sample[3]]);
      if (e < pick_err) {
        pick_err = e;
        pick = c;
      }
    }
    const int count = count_pnp_inliers(K, candidates[pick], points3d, pixels,
                                        cfg.epipolar_threshold, nullptr);
    if (count > best_count) {
      best_count = count;
      best_pose = candidates[pick];
      have_best = true;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_all = std::pow(w, 4);
      if (p_all > 1.0 - 1e-12) {
        needed = 0;
      } else if (p_all > 1e-12) {
        needed = std::log(1.0 - cfg.confidence) / std::log(1.0 - p_all);
      }
    }
  }

  if (!have_best || best_count < 4)
    throw DegenerateConfiguration("PnP RANSAC found no consensus");

  std::vector<std::uint8_t> mask;
  count_pnp_inliers(K, best_pose, points3d, pixels, cfg.epipolar_threshold,
                    &mask);
  Se3 refined = refine_pose(K, best_pose, points3d, pixels, mask);
  count_pnp_inliers(K, refined, points3d, pixels, cfg.epipolar_threshold,
                    &mask);
  refined = refine_pose(K, refined, points3d, pixels, mask);

  double err_sum = 0;
  int err_n = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    err_sum += reproj_error(K, refined, points3d[i], pixels[i]);
    ++err_n;
  }
  if (err_n == 0 || err_sum / err_n > 5.0)
    throw NonConvergence("PnP refinement left mean reprojection above 5 px");
  return refined;
}

}  // namespace vo
