// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vo/core/camera.hpp"
#include "vo/core/se3.hpp"
#include "vo/core/types.hpp"

namespace vo {

struct TriangulationResult {
  double depth;     // z of the midpoint in keyframe coordinates, meters
  double residual;  // gap between the two closest ray points, meters
};

// Two-view midpoint triangulation. T_kt maps keyframe-frame points into the
// target frame. The returned depth minimizes the summed squared distances to
// the two rays (common-perpendicular midpoint).
TriangulationResult midpoint_triangulate(const Vec2& p_k, const Vec2& p_t,
                                         const Se3& T_kt,
                                         const CameraIntrinsics& K);

struct TriangulationJacobian {
  double depth = 0;
  double residual = 0;
  Vec2 d_depth_d_pk = Vec2::Zero();
  Vec2 d_depth_d_pt = Vec2::Zero();
  // Left perturbation T ← exp([rho, phi]) ∘ T, translation part first.
  Vec6 d_depth_d_pose = Vec6::Zero();
};

TriangulationJacobian triangulate_jacobian(const Vec2& p_k, const Vec2& p_t,
                                           const Se3& T_kt,
                                           const CameraIntrinsics& K);

struct SparseDepthEntry {
  int x = 0, y = 0;     // keyframe pixel
  double depth = 0;     // meters
  double residual = 0;  // ray-gap residual, meters
};

struct SparseDepthMap {
  std::vector<SparseDepthEntry> entries;
  int frame = -1;
};

struct DensifiedEntry {
  int x = 0, y = 0;
  double depth = 0;
  int src_x = 0, src_y = 0;
  double residual = 0;
};

struct DensifiedDepthPatchMap {
  std::vector<DensifiedEntry> entries;
};

// Replicates each sparse point over its 3×3 neighbourhood, clipped to image
// bounds. Points with residual > 0.1 × depth are dropped first. Overlaps
// keep the entry with the smaller residual (ties broken by source pixel in
// scan order, making the merge order-independent).
DensifiedDepthPatchMap densify_patches(const SparseDepthMap& sparse, int width,
                                       int height);

}  // namespace vo
