// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "vo/core/camera.hpp"
#include "vo/core/image.hpp"
#include "vo/core/se3.hpp"
#include "vo/core/types.hpp"
#include "vo/filter/depth_filter.hpp"

namespace vo {

// One source frame observed from the current keyframe. `T` maps keyframe
// points into this frame; `gamma` is its photometric uncertainty map,
// indexed at keyframe pixel coordinates.
struct FrameObservation {
  Image image;
  Image gamma;
  Se3 T;
};

// Stacked weighted residual rows. Row j constrains depth of active pixel
// `row_pixel[j]` and, when the owning frame's pose is optimized, the pose.
struct PhotometricSystem {
  std::vector<std::pair<int, int>> pixels;  // active keyframe pixels (x, y)
  std::vector<double> r;
  std::vector<double> J_D;
  std::vector<Vec6> J_T;                    // zero rows for fixed-pose frames
  std::vector<int> row_pixel;
};

struct GnConfig {
  int iterations = 3;
  double lambda0 = 1e-4;
  double lambda_max = 1e8;
  int max_attempts = 8;     // damping raises per iteration
  bool damped = true;       // false: plain undamped steps, no rejection
  bool optimize_depth = true;  // false: keyframe depth held fixed, pose only
  double gradient_min = 1e-3;
  double depth_floor = 1e-4;
  double gamma_floor = 1e-3;
};

struct GnStep {
  VecX d_depth;  // per active pixel
  Vec6 d_pose = Vec6::Zero();
};

struct OptimizeResult {
  std::vector<std::pair<int, int>> pixels;  // active keyframe pixels (x, y)
  std::vector<double> depth;                // refined depth, aligned to pixels
  Se3 pose;                                 // refined pose of the last frame
  double initial_cost = 0;                  // mean squared residual
  double final_cost = 0;
  int accepted_steps = 0;
};

// Directional seed for the forward-mode derivative of optimize. Depth and
// gamma directions are full-size (rows = height) grids; entries outside the
// active pixel set are ignored. An empty gamma list means a zero direction.
struct GnSeed {
  MatX d_depth;               // direction on initial depth values
  Vec6 d_pose = Vec6::Zero(); // left-tangent direction on the initial pose
  std::vector<MatX> d_gamma;  // per frame, optional
};

struct GnJvp {
  OptimizeResult primal;
  VecX d_depth;               // tangent of refined depth, aligned to pixels
  Vec6 d_pose = Vec6::Zero(); // left tangent of the refined pose
  double d_cost = 0;
};

// Keyframe pixels that carry photometric constraints: usable depth state and
// image gradient magnitude above cfg.gradient_min. Border pixels never
// qualify (central differences vanish there). Scan order: row-major.
std::vector<std::pair<int, int>> active_pixels(const Image& I_k,
                                               const DepthFilterGrid& depth,
                                               const GnConfig& cfg);

// Residual and Jacobian rows of a single source frame against the keyframe,
// with the frame's pose treated as free. Throws EmptySystem when no valid
// warp survives.
PhotometricSystem compute_residuals(const Image& I_k,
                                    const FrameObservation& frame,
                                    const DepthFilterGrid& depth,
                                    const CameraIntrinsics& K,
                                    const GnConfig& cfg = {});

// One damped Gauss-Newton increment from the stacked system: Schur
// complement over the diagonal depth block, then per-pixel back-substitution.
// Pixels whose damped depth curvature underflows are held fixed.
GnStep gn_step(const PhotometricSystem& sys, double lambda);

// Joint refinement of keyframe depth and the last frame's pose over all
// given frames. Earlier frames contribute depth-only rows at fixed poses.
// Accepted-step cost is non-increasing; rejected steps raise damping.
OptimizeResult optimize(const Image& I_k,
                        const std::vector<FrameObservation>& frames,
                        const DepthFilterGrid& depth, const CameraIntrinsics& K,
                        const GnConfig& cfg = {});

// Forward-mode directional derivative of optimize with respect to initial
// depth, initial pose, and the gamma maps, differentiated through the
// unrolled iteration with branch decisions frozen at primal values.
GnJvp optimize_gradients(const Image& I_k,
                         const std::vector<FrameObservation>& frames,
                         const DepthFilterGrid& depth,
                         const CameraIntrinsics& K, const GnSeed& seed,
                         const GnConfig& cfg = {});

}  // namespace vo
