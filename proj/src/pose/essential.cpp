// SPDX-License-Identifier: Apache-2.0
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "vo/core/errors.hpp"
#include "vo/core/rng.hpp"
#include "vo/pose/pose.hpp"

namespace vo {

namespace {

struct NormalizedPoints {
  std::vector<Vec2> xk, xt;  // camera-normalized coordinates
};

NormalizedPoints normalize_points(const CorrespondenceSet& cs,
                                  const CameraIntrinsics& K) {
  NormalizedPoints n;
  n.xk.reserve(cs.size());
  n.xt.reserve(cs.size());
  for (const auto& c : cs.pairs) {
    const Vec3 rk = K.ray(c.p_k);
    const Vec3 rt = K.ray(c.p_t);
    n.xk.emplace_back(rk.x(), rk.y());
    n.xt.emplace_back(rt.x(), rt.y());
  }
  return n;
}

// Isotropic scaling of a point subset to zero mean and sqrt(2) RMS radius.
Mat3 hartley_transform(const std::vector<Vec2>& pts,
                       const std::vector<int>& idx) {
  Vec2 c = Vec2::Zero();
  for (int i : idx) c += pts[i];
  c /= static_cast<double>(idx.size());
  double dist = 0;
  for (int i : idx) dist += (pts[i] - c).norm();
  dist /= static_cast<double>(idx.size());
  const double s = dist > 1e-15 ? std::sqrt(2.0) / dist : 1.0;
  Mat3 T;
  T << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return T;
}

Mat3 project_to_essential(const Mat3& E) {
  Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  const double s = 0.5 * (sv(0) + sv(1));
  Mat3 S = Mat3::Zero();
  S(0, 0) = s;
  S(1, 1) = s;
  return svd.matrixU() * S * svd.matrixV().transpose();
}

// Least-squares eight-point solve over the indexed subset. Returns false
// when the constraint matrix is rank-deficient (degenerate geometry).
bool eight_point(const NormalizedPoints& pts, const std::vector<int>& idx,
                 Mat3* E_out) {
  const Mat3 Tk = hartley_transform(pts.xk, idx);
  const Mat3 Tt = hartley_transform(pts.xt, idx);
  MatX A(static_cast<int>(idx.size()), 9);
  for (size_t r = 0; r < idx.size(); ++r) {
    const int i = idx[r];
    const Vec3 x1 = Tk * Vec3(pts.xk[i].x(), pts.xk[i].y(), 1.0);
    const Vec3 x2 = Tt * Vec3(pts.xt[i].x(), pts.xt[i].y(), 1.0);
    A.row(static_cast<int>(r)) << x2.x() * x1.x(), x2.x() * x1.y(), x2.x(),
        x2.y() * x1.x(), x2.y() * x1.y(), x2.y(), x1.x(), x1.y(), 1.0;
  }
  Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // a second vanishing singular value means the sample does not pin E
  if (idx.size() >= 8 && sv(7) < 1e-8 * sv(0)) return false;
  const VecX f = svd.matrixV().col(8);
  Mat3 En;
  En << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  *E_out = Tt.transpose() * project_to_essential(En) * Tk;
  return true;
}

// Squared Sampson distance in pixels of correspondence i under fundamental F.
double sampson_sq(const Mat3& F, const Vec2& pk, const Vec2& pt) {
  const Vec3 x1(pk.x(), pk.y(), 1.0);
  const Vec3 x2(pt.x(), pt.y(), 1.0);
  const Vec3 Fx1 = F * x1;
  const Vec3 Ftx2 = F.transpose() * x2;
  const double err = x2.dot(Fx1);
  const double denom =
      Fx1.x() * Fx1.x() + Fx1.y() * Fx1.y() + Ftx2.x() * Ftx2.x() +
      Ftx2.y() * Ftx2.y();
  if (denom < 1e-30) return 1e30;
  return err * err / denom;
}

int count_inliers(const Mat3& E, const CorrespondenceSet& cs,
                  const CameraIntrinsics& K, double thr_px,
                  std::vector<std::uint8_t>* mask) {
  const Mat3 Kinv = K.matrix().inverse();
  const Mat3 F = Kinv.transpose() * E * Kinv;
  const double thr2 = thr_px * thr_px;
  int count = 0;
  if (mask) mask->assign(cs.size(), 0);
  for (size_t i = 0; i < cs.size(); ++i) {
    if (sampson_sq(F, cs.pairs[i].p_k, cs.pairs[i].p_t) <= thr2) {
      ++count;
      if (mask) (*mask)[i] = 1;
    }
  }
  return count;
}

// Midpoint depths in both frames; false when rays are unusable.
bool depths_for(const Vec2& xk, const Vec2& xt, const Mat3& R, const Vec3& t,
                double* z1, double* z2) {
  const Vec3 d1(xk.x(), xk.y(), 1.0);
  const Vec3 d2 = R.transpose() * Vec3(xt.x(), xt.y(), 1.0);
  const Vec3 w = -(R.transpose() * t);
  const double a = d1.dot(d1), b = d1.dot(d2), c = d2.dot(d2);
  const double p = d1.dot(w), q = d2.dot(w);
  const double D = b * b - a * c;
  if (std::abs(D) < 1e-18) return false;
  const double s = (-c * p + b * q) / D;
  const double u = (a * q - b * p) / D;
  const Vec3 mid = 0.5 * (s * d1 + w + u * d2);
  *z1 = mid.z();
  *z2 = (R * mid + t).z();
  return true;
}

Se3 decompose_with_cheirality(const Mat3& E, const NormalizedPoints& pts,
                              const std::vector<std::uint8_t>& mask) {
  Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  Mat3 V = svd.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Mat3 W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 R1 = U * W * V.transpose();
  const Mat3 R2 = U * W.transpose() * V.transpose();
  const Vec3 t = U.col(2);

  const Mat3 Rs[4] = {R1, R1, R2, R2};
  const Vec3 ts[4] = {t, -t, t, -t};
  int best = 0, best_count = -1;
  for (int c = 0; c < 4; ++c) {
    int count = 0;
    for (size_t i = 0; i < pts.xk.size(); ++i) {
      if (!mask[i]) continue;
      double z1, z2;
      if (depths_for(pts.xk[i], pts.xt[i], Rs[c], ts[c], &z1, &z2) &&
          z1 > 0 && z2 > 0)
        ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = c;
    }
  }
  return Se3(Rs[best], ts[best]);
}

}  // namespace

EssentialEstimate estimate_essential(const CorrespondenceSet& cs,
                                     const CameraIntrinsics& K,
                                     const RansacConfig& cfg) {
  const size_t n = cs.size();
  if (n < 8)
    throw InsufficientCorrespondences(
        "essential estimation needs at least 8 correspondences");
  const NormalizedPoints pts = normalize_points(cs, K);

  Rng rng(cfg.rng_seed);
  Mat3 best_E = Mat3::Zero();
  int best_count = 0;
  double needed = cfg.max_iterations;

  std::vector<int> sample(8);
  for (int iter = 0; iter < cfg.max_iterations &&
                     static_cast<double>(iter) < needed;
       ++iter) {
    for (int k = 0; k < 8; ++k) {
      bool fresh;
      do {
        sample[k] = rng.uniform_int(0, static_cast<int>(n) - 1);
        fresh = true;
        for (int j = 0; j < k; ++j)
          if (sample[j] == sample[k]) fresh = false;
      } while (!fresh);
    }
    Mat3 E;
    if (!eight_point(pts, sample, &E)) continue;
    const int count = count_inliers(E, cs, K, cfg.epipolar_threshold, nullptr);
    if (count > best_count) {
      best_count = count;
      best_E = E;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_all = std::pow(w, 8);
      if (p_all > 1.0 - 1e-12) {
        needed = 0;
      } else if (p_all > 1e-12) {
        needed = std::log(1.0 - cfg.confidence) / std::log(1.0 - p_all);
      }
    }
  }

  if (static_cast<double>(best_count) < 0.3 * static_cast<double>(n))
    throw DegenerateConfiguration(
        "essential RANSAC consensus below 30% inliers");

  // two refit rounds on the consensus set
  std::vector<std::uint8_t> mask;
  count_inliers(best_E, cs, K, cfg.epipolar_threshold, &mask);
  Mat3 E = best_E;
  for (int round = 0; round < 2; ++round) {
    std::vector<int> idx;
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) idx.push_back(static_cast<int>(i));
    if (idx.size() < 8) break;
    Mat3 refit;
    if (!eight_point(pts, idx, &refit)) break;
    E = refit;
    count_inliers(E, cs, K, cfg.epipolar_threshold, &mask);
  }

  EssentialEstimate out;
  out.E = E;
  out.inlier_mask = mask;
  out.num_inliers = 0;
  for (auto m : mask) out.num_inliers += m;
  out.inlier_ratio = static_cast<double>(out.num_inliers) /
                     static_cast<double>(n);
  out.pose = decompose_with_cheirality(E, pts, mask);
  return out;
}

double recover_scale(const std::vector<double>& triangulated,
                     const std::vector<double>& prior) {
  if (triangulated.size() != prior.size())
    throw DimensionMismatch("scale recovery inputs differ in length");
  std::vector<double> ratios;
  ratios.reserve(triangulated.size());
  for (size_t i = 0; i < triangulated.size(); ++i)
    if (triangulated[i] > 0 && prior[i] > 0)
      ratios.push_back(prior[i] / triangulated[i]);
  if (ratios.size() < 10)
    throw InsufficientOverlap("fewer than 10 shared depth pixels");
  const size_t mid = ratios.size() / 2;
  std::nth_element(ratios.begin(), ratios.begin() + mid, ratios.end());
  double med = ratios[mid];
  if (ratios.size() % 2 == 0) {
    const auto lower = std::max_element(ratios.begin(), ratios.begin() + mid);
    med = 0.5 * (med + *lower);
  }
  return med;
}

SolverDecision select_solver(const CorrespondenceSet& cs,
                             const CameraIntrinsics& K,
                             const RansacConfig& cfg, bool prior_available) {
  SolverDecision d;
  if (cs.size() < 8) {
    d.degenerate = true;
  } else {
    try {
      d.essential = estimate_essential(cs, K, cfg);
    } catch (const DegenerateConfiguration&) {
      d.degenerate = true;
    }
  }

  if (!d.degenerate) {
    const Mat3& R = d.essential->pose.rotation();
    std::vector<double> angles;
    for (size_t i = 0; i < cs.size(); ++i) {
      if (!d.essential->inlier_mask[i]) continue;
      const Vec3 d1 = K.ray(cs.pairs[i].p_k).normalized();
      const Vec3 d2 = (R.transpose() * K.ray(cs.pairs[i].p_t)).normalized();
      const double c = std::clamp(d1.dot(d2), -1.0, 1.0);
      angles.push_back(std::acos(c) * 180.0 / M_PI);
    }
    if (!angles.empty()) {
      const size_t mid = angles.size() / 2;
      std::nth_element(angles.begin(), angles.begin() + mid, angles.end());
      d.median_parallax_deg = angles[mid];
    }
    // The survivors' forward-backward residual is pure matching noise, so
    // the median flow-to-noise ratio measures whether two-view geometry is
    // observable; below the floor the decomposition direction is unreliable
    // even when parallax clears the degeneracy bound.
    constexpr double kMinFlowSnr = 20.0;
    std::vector<double> mags, res;
    mags.reserve(cs.size());
    res.reserve(cs.size());
    for (const auto& c : cs.pairs) {
      mags.push_back((c.p_t - c.p_k).norm());
      res.push_back(c.consistency_residual);
    }
    const size_t h = mags.size() / 2;
    std::nth_element(mags.begin(), mags.begin() + h, mags.end());
    std::nth_element(res.begin(), res.begin() + h, res.end());
    const double snr = mags[h] / std::max(res[h], 1e-12);
    if (d.median_parallax_deg >= 1.0 &&
        (snr >= kMinFlowSnr || !prior_available)) {
      d.choice = SolverChoice::Essential;
      return d;
    }
  }

  // low parallax or degenerate two-view geometry
  if (prior_available) {
    d.choice = SolverChoice::Pnp;
    return d;
  }
  if (d.degenerate)
    throw NoViableSolver(
        "two-view geometry degenerate and no depth prior available");
  d.choice = SolverChoice::Essential;  // best effort without a prior
  return d;
}

}  // namespace vo
