// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vo/core/camera.hpp"
#include "vo/core/se3.hpp"
#include "vo/core/types.hpp"
#include "vo/flow/flow.hpp"

namespace vo {

struct RansacConfig {
  int max_iterations = 2000;
  double epipolar_threshold = 1.0;  // Sampson / reprojection bound, px
  double confidence = 0.999;
  std::uint64_t rng_seed = 1;
};

struct EssentialEstimate {
  Mat3 E = Mat3::Zero();
  std::vector<std::uint8_t> inlier_mask;
  Se3 pose;  // keyframe → target, unit-norm translation
  int num_inliers = 0;
  double inlier_ratio = 0;
};

// Normalized eight-point solver inside RANSAC, refit on the consensus set,
// then decomposed with the cheirality test. The pose maps keyframe points
// into the target frame; its translation has unit norm.
EssentialEstimate estimate_essential(const CorrespondenceSet& cs,
                                     const CameraIntrinsics& K,
                                     const RansacConfig& cfg);

// RANSAC-wrapped minimal 3-point solves refined by Gauss-Newton on the
// consensus set. Returns the metric pose mapping point coordinates (given in
// the keyframe frame) into the target camera frame.
Se3 solve_pnp(const std::vector<Vec3>& points3d,
              const std::vector<Vec2>& pixels, const CameraIntrinsics& K,
              const RansacConfig& cfg);

// Median over shared pixels of prior depth / triangulated depth.
// `triangulated` and `prior` are paired samples at the same pixels.
double recover_scale(const std::vector<double>& triangulated,
                     const std::vector<double>& prior);

enum class SolverChoice { Essential, Pnp };

struct SolverDecision {
  SolverChoice choice = SolverChoice::Essential;
  std::optional<EssentialEstimate> essential;  // set when 2D-2D succeeded
  double median_parallax_deg = 0;
  bool degenerate = false;
};

// Runs the 2D-2D estimator and measures median triangulation parallax over
// its inliers; falls back to PnP under low parallax or a degenerate
// configuration when a depth prior exists.
SolverDecision select_solver(const CorrespondenceSet& cs,
                             const CameraIntrinsics& K,
                             const RansacConfig& cfg, bool prior_available);

}  // namespace vo
