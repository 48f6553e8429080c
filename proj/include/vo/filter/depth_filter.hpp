// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "vo/core/camera.hpp"
#include "vo/core/image.hpp"
#include "vo/core/se3.hpp"
#include "vo/core/types.hpp"

namespace vo {

// Per-pixel posterior over inverse depth: Gaussian on the estimate, Beta on
// the inlier ratio, with a uniform outlier component on [z_min, z_max].
struct DepthFilterState {
  double a = 10, b = 10;    // Beta pseudo-counts
  double mu = 0;            // inverse-depth mean, 1/m
  double sigma2 = 0;        // inverse-depth variance
  double z_min = 0, z_max = 0;
  bool converged = false;
  bool failed = false;

  double inlier_ratio() const { return a / (a + b); }
  double expected_depth() const { return 1.0 / mu; }
};

struct DepthMeasurement {
  double z = 0;     // inverse depth, 1/m
  double tau2 = 0;  // measurement variance
};

// mu = 1/d0, support μ ± σ with the lower bound clamped at 1e-6.
DepthFilterState init_state(double d0, double sigma0);

// Moment-matched posterior after fusing one measurement under the
// inlier-Gaussian / outlier-uniform mixture. No-op on converged or failed
// states.
void update(DepthFilterState& s, const DepthMeasurement& m);

// Squared inverse-depth change caused by one pixel of disparity error along
// the epipolar direction at p_t.
double measurement_variance(const Vec2& p_k, const Vec2& p_t, const Se3& T_kt,
                            const CameraIntrinsics& K);

void check_convergence(DepthFilterState& s, double sigma_threshold = 0.05,
                       double inlier_floor = 0.2);

struct DepthFilterGrid {
  int width = 0, height = 0;
  std::vector<DepthFilterState> states;
  Mask valid;

  DepthFilterGrid() = default;
  DepthFilterGrid(int w, int h)
      : width(w), height(h), states(static_cast<size_t>(w) * h),
        valid(w, h) {}
  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  DepthFilterState& at(int x, int y) { return states[idx(x, y)]; }
  const DepthFilterState& at(int x, int y) const { return states[idx(x, y)]; }
  bool usable(int x, int y) const {
    return valid.at(x, y) && !at(x, y).failed;
  }

  // Expected depth map (1/mu) plus validity of usable pixels.
  Image expected_depth_map() const;
  Mask usable_mask() const;
};

// Per-pixel Eq.-style initialization from a single-view depth prior d0 and
// inverse-depth uncertainty map. Pixels may be masked invalid.
DepthFilterGrid init_from_prior(const Image& d0, const Image& sigma,
                                const Mask* valid_mask = nullptr);

}  // namespace vo
