// SPDX-License-Identifier: Apache-2.0
#include "vo/tri/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <utility>

#include "vo/core/errors.hpp"

namespace vo {

namespace {

struct RayGeometry {
  Vec3 d1;  // keyframe ray through p_k
  Vec3 d2;  // target ray, expressed in keyframe coordinates
  Vec3 w;   // target camera center in keyframe coordinates
  double a, b, c, p, q, D;
  double s, u;  // ray parameters of the closest points
};

RayGeometry solve_rays(const Vec2& p_k, const Vec2& p_t, const Se3& T_kt,
                       const CameraIntrinsics& K) {
  RayGeometry g;
  g.d1 = K.ray(p_k);
  const Vec3 bearing_t = K.ray(p_t);
  const Mat3& R = T_kt.rotation();
  g.d2 = R.transpose() * bearing_t;
  g.w = -(R.transpose() * T_kt.translation());

  if (g.w.norm() < 1e-12) throw ParallelRays("zero baseline");
  const double sin_angle =
      g.d1.cross(g.d2).norm() / (g.d1.norm() * g.d2.norm());
  if (sin_angle < 1e-8) throw ParallelRays("rays nearly parallel");

  g.a = g.d1.dot(g.d1);
  g.b = g.d1.dot(g.d2);
  g.c = g.d2.dot(g.d2);
  g.p = g.d1.dot(g.w);
  g.q = g.d2.dot(g.w);
  g.D = g.b * g.b - g.a * g.c;
  g.s = (-g.c * g.p + g.b * g.q) / g.D;
  g.u = (g.a * g.q - g.b * g.p) / g.D;
  return g;
}

}  // namespace

TriangulationResult midpoint_triangulate(const Vec2& p_k, const Vec2& p_t,
                                         const Se3& T_kt,
                                         const CameraIntrinsics& K) {
  const RayGeometry g = solve_rays(p_k, p_t, T_kt, K);
  const Vec3 on1 = g.s * g.d1;
  const Vec3 on2 = g.w + g.u * g.d2;
  const Vec3 mid = 0.5 * (on1 + on2);

  TriangulationResult r;
  r.depth = mid.z();
  r.residual = (on1 - on2).norm();
  if (r.depth <= 0 || (T_kt * mid).z() <= 0)
    throw NegativeDepth("triangulated point behind a camera");
  return r;
}

TriangulationJacobian triangulate_jacobian(const Vec2& p_k, const Vec2& p_t,
                                           const Se3& T_kt,
                                           const CameraIntrinsics& K) {
  const RayGeometry g = solve_rays(p_k, p_t, T_kt, K);
  const Vec3 on1 = g.s * g.d1;
  const Vec3 on2 = g.w + g.u * g.d2;
  const Vec3 mid = 0.5 * (on1 + on2);

  TriangulationJacobian out;
  out.depth = mid.z();
  out.residual = (on1 - on2).norm();
  if (out.depth <= 0 || (T_kt * mid).z() <= 0)
    throw NegativeDepth("triangulated point behind a camera");

  const Mat3& R = T_kt.rotation();
  const Vec3 bearing_t = K.ray(p_t);

  // One directional derivative of the closed form per input coordinate.
  struct InputDeriv {
    Vec3 dd1 = Vec3::Zero();
    Vec3 dd2 = Vec3::Zero();
    Vec3 dw = Vec3::Zero();
  };
  InputDeriv deriv[10];
  // p_k
  deriv[0].dd1 = Vec3(1.0 / K.fx, 0, 0);
  deriv[1].dd1 = Vec3(0, 1.0 / K.fy, 0);
  // p_t
  deriv[2].dd2 = R.transpose() * Vec3(1.0 / K.fx, 0, 0);
  deriv[3].dd2 = R.transpose() * Vec3(0, 1.0 / K.fy, 0);
  // pose: translation part rho, then rotation part phi
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = 1.0;
    deriv[4 + k].dw = -(R.transpose() * e);
    deriv[7 + k].dd2 = R.transpose() * e.cross(bearing_t);
  }

  double grad[10];
  for (int k = 0; k < 10; ++k) {
    const InputDeriv& d = deriv[k];
    const double da = 2.0 * g.d1.dot(d.dd1);
    const double db = d.dd1.dot(g.d2) + g.d1.dot(d.dd2);
    const double dc = 2.0 * g.d2.dot(d.dd2);
    const double dp = d.dd1.dot(g.w) + g.d1.dot(d.dw);
    const double dq = d.dd2.dot(g.w) + g.d2.dot(d.dw);
    const double dD = 2.0 * g.b * db - (da * g.c + g.a * dc);
    const double ds =
        ((-dc * g.p - g.c * dp + db * g.q + g.b * dq) - g.s * dD) / g.D;
    const double du =
        ((da * g.q + g.a * dq - db * g.p - g.b * dp) - g.u * dD) / g.D;
    grad[k] = 0.5 * (ds * g.d1.z() + g.s * d.dd1.z() + d.dw.z() +
                     du * g.d2.z() + g.u * d.dd2.z());
  }

  out.d_depth_d_pk = Vec2(grad[0], grad[1]);
  out.d_depth_d_pt = Vec2(grad[2], grad[3]);
  for (int k = 0; k < 6; ++k) out.d_depth_d_pose[k] = grad[4 + k];
  return out;
}

DensifiedDepthPatchMap densify_patches(const SparseDepthMap& sparse, int width,
                                       int height) {
  struct Cell {
    double depth, residual;
    int src_x, src_y;
  };
  std::map<std::pair<int, int>, Cell> grid;
  for (const auto& e : sparse.entries) {
    if (e.residual > 0.1 * e.depth) continue;  // gross ray mismatch
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = e.x + dx, y = e.y + dy;
        if (x < 0 || y < 0 || x >= width || y >= height) continue;
        const Cell cand{e.depth, e.residual, e.x, e.y};
        auto [it, inserted] = grid.try_emplace({y, x}, cand);
        if (inserted) continue;
        // A pixel's own measurement beats any transferred fill-in; smaller
        // ray residual breaks collisions among fill-ins.
        Cell& cur = it->second;
        const int rank_new = (dx == 0 && dy == 0) ? 0 : 1;
        const int rank_cur =
            (it->first.second == cur.src_x && it->first.first == cur.src_y)
                ? 0
                : 1;
        const auto key_new = std::make_tuple(rank_new, cand.residual,
                                             cand.src_y, cand.src_x);
        const auto key_cur = std::make_tuple(rank_cur, cur.residual,
                                             cur.src_y, cur.src_x);
        if (key_new < key_cur) cur = cand;
      }
    }
  }
  DensifiedDepthPatchMap out;
  out.entries.reserve(grid.size());
  for (const auto& [key, c] : grid) {
    DensifiedEntry d;
    d.y = key.first;
    d.x = key.second;
    d.depth = c.depth;
    d.residual = c.residual;
    d.src_x = c.src_x;
    d.src_y = c.src_y;
    out.entries.push_back(d);
  }
  return out;
}

}  // namespace vo
