// SPDX-License-Identifier: Apache-2.0
#include "vo/filter/depth_filter.hpp"

#include <cmath>

#include "vo/core/errors.hpp"
#include "vo/tri/triangulation.hpp"

namespace vo {

DepthFilterState init_state(double d0, double sigma0) {
  if (!(d0 > 0)) throw NonPositiveDepth("prior depth must be positive");
  if (!(sigma0 > 0))
    throw NonPositiveInput("prior inverse-depth sigma must be positive");
  DepthFilterState s;
  s.a = 10;
  s.b = 10;
  s.mu = 1.0 / d0;
  s.sigma2 = sigma0 * sigma0;
  s.z_max = s.mu + sigma0;
  s.z_min = std::max(s.mu - sigma0, 1e-6);
  return s;
}

void update(DepthFilterState& s, const DepthMeasurement& m) {
  if (s.converged || s.failed) return;

  const double norm_s2 = s.sigma2 + m.tau2;
  const double gauss =
      std::exp(-0.5 * (m.z - s.mu) * (m.z - s.mu) / norm_s2) /
      std::sqrt(2.0 * M_PI * norm_s2);
  const double uniform =
      (m.z >= s.z_min && m.z <= s.z_max) ? 1.0 / (s.z_max - s.z_min) : 0.0;

  double c1 = s.a / (s.a + s.b) * gauss;
  double c2 = s.b / (s.a + s.b) * uniform;
  const double norm = c1 + c2;
  if (norm < 1e-300) {
    // measurement unexplained by either component: count it as an outlier
    s.b += 1.0;
    return;
  }
  c1 /= norm;
  c2 /= norm;

  const double ss = 1.0 / (1.0 / s.sigma2 + 1.0 / m.tau2);
  const double mm = ss * (s.mu / s.sigma2 + m.z / m.tau2);

  const double f = c1 * (s.a + 1.0) / (s.a + s.b + 1.0) +
                   c2 * s.a / (s.a + s.b + 1.0);
  const double e =
      c1 * (s.a + 1.0) * (s.a + 2.0) /
          ((s.a + s.b + 1.0) * (s.a + s.b + 2.0)) +
      c2 * s.a * (s.a + 1.0) / ((s.a + s.b + 1.0) * (s.a + s.b + 2.0));

  const double mu_new = c1 * mm + c2 * s.mu;
  const double sigma2_new =
      c1 * (ss + mm * mm) + c2 * (s.sigma2 + s.mu * s.mu) - mu_new * mu_new;

  const double a_new = (e - f) / (f - e / f);
  const double b_new = a_new * (1.0 - f) / f;

  s.mu = mu_new;
  s.sigma2 = std::max(sigma2_new, 1e-20);
  s.a = std::max(a_new, 1e-6);
  s.b = std::max(b_new, 1e-6);
}

double measurement_variance(const Vec2& p_k, const Vec2& p_t, const Se3& T_kt,
                            const CameraIntrinsics& K) {
  const TriangulationResult base = midpoint_triangulate(p_k, p_t, T_kt, K);

  // Epipolar direction at p_t: image velocity of the keyframe ray's
  // projection as the ray parameter varies, evaluated at the triangulated
  // point.
  const Vec3 d1 = K.ray(p_k);
  const Vec3 X_t = T_kt * (base.depth * d1);
  const Vec3 dX = T_kt.rotation() * d1;
  const double z = X_t.z();
  const Vec2 tangent(K.fx * (dX.x() * z - X_t.x() * dX.z()) / (z * z),
                     K.fy * (dX.y() * z - X_t.y() * dX.z()) / (z * z));
  const double tn = tangent.norm();
  if (tn < 1e-12) throw ParallelRays("epipolar direction undefined");
  const Vec2 p_shift = p_t + tangent / tn;

  const TriangulationResult shifted =
      midpoint_triangulate(p_k, p_shift, T_kt, K);
  const double dz = 1.0 / shifted.depth - 1.0 / base.depth;
  return dz * dz;
}

void check_convergence(DepthFilterState& s, double sigma_threshold,
                       double inlier_floor) {
  if (s.inlier_ratio() < inlier_floor) {
    s.failed = true;
    s.converged = false;
    return;
  }
  if (std::sqrt(s.sigma2) < sigma_threshold * (s.z_max - s.z_min)) {
    s.converged = true;
    s.failed = false;
  }
}

Image DepthFilterGrid::expected_depth_map() const {
  Image d(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const DepthFilterState& s = at(x, y);
      d.at(x, y) = (usable(x, y) && s.mu > 0) ? 1.0 / s.mu : 0.0;
    }
  return d;
}

Mask DepthFilterGrid::usable_mask() const {
  Mask m(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      m.set(x, y, usable(x, y) && at(x, y).mu > 0);
  return m;
}

DepthFilterGrid init_from_prior(const Image& d0, const Image& sigma,
                                const Mask* valid_mask) {
  if (!d0.same_size(sigma))
    throw DimensionMismatch("depth and sigma maps differ in size");
  DepthFilterGrid g(d0.width(), d0.height());
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (valid_mask && !valid_mask->at(x, y)) {
        g.valid.set(x, y, false);
        continue;
      }
      g.at(x, y) = init_state(d0.at(x, y), sigma.at(x, y));
      g.valid.set(x, y, true);
    }
  }
  return g;
}

}  // namespace vo
