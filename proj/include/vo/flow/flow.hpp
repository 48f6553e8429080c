// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "vo/core/types.hpp"

namespace vo {

// Dense per-pixel displacement field, pixels. dx/dy are row-major planes.
struct FlowField {
  int width = 0, height = 0;
  std::vector<double> dx, dy;
  int source_frame = -1, target_frame = -1;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w),
        height(h),
        dx(static_cast<size_t>(w) * h, 0.0),
        dy(static_cast<size_t>(w) * h, 0.0) {}

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  Vec2 at(int x, int y) const { return Vec2(dx[idx(x, y)], dy[idx(x, y)]); }
  void set(int x, int y, const Vec2& f) {
    dx[idx(x, y)] = f.x();
    dy[idx(x, y)] = f.y();
  }
  bool same_size(const FlowField& o) const {
    return width == o.width && height == o.height;
  }
};

struct Correspondence {
  Vec2 p_k;  // source pixel (integer grid position)
  Vec2 p_t;  // matched subpixel position in the target frame
  double consistency_residual = 0;  // ‖fwd + sampled bwd‖, pixels
  double flow_magnitude = 0;        // ‖fwd‖, pixels
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  bool empty() const { return pairs.empty(); }
  size_t size() const { return pairs.size(); }
};

struct RobustnessThresholds {
  double delta1 = 0.1;            // forward-backward consistency bound, px
  double delta2 = 3.0;            // minimum flow magnitude, px
  double keyframe_mean_flow = 30.0;
  size_t max_correspondences = 5000;
};

// Keeps the pixels passing both consistency tests, then caps the set by
// uniform subsampling in scan order. Backward flow is sampled bilinearly at
// the forward-displaced position.
CorrespondenceSet select_robust(const FlowField& fkt, const FlowField& ftk,
                                const RobustnessThresholds& th);

double mean_flow(const CorrespondenceSet& cs);

// True when tracking moved far enough (mean flow strictly above threshold)
// or when the set is empty (tracking-loss recovery).
bool should_create_keyframe(const CorrespondenceSet& cs,
                            const RobustnessThresholds& th);

// Middlebury .flo layout: float magic 202021.25, int32 width/height,
// row-major interleaved float x/y displacements, little-endian.
FlowField load_flo(const std::string& path);
void save_flo(const std::string& path, const FlowField& f);

}  // namespace vo
