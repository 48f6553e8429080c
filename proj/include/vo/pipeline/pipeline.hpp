// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vo/adapt/losses.hpp"
#include "vo/core/camera.hpp"
#include "vo/core/config.hpp"
#include "vo/core/image.hpp"
#include "vo/core/se3.hpp"
#include "vo/eval/eval.hpp"
#include "vo/filter/depth_filter.hpp"
#include "vo/flow/flow.hpp"
#include "vo/gn/photometric.hpp"
#include "vo/pipeline/providers.hpp"
#include "vo/pose/pose.hpp"
#include "vo/tri/triangulation.hpp"

namespace vo {

// Frame-to-keyframe tracking holds the keyframe depth fixed; depth
// refinement is the Bayesian filter's job, so the photometric solve is
// pose-only and the translation scale stays observable.
inline GnConfig tracking_gn_defaults() {
  GnConfig g;
  g.optimize_depth = false;
  return g;
}

struct PipelineConfig {
  CameraIntrinsics camera{100.0, 100.0, 63.5, 47.5, 128, 96};
  RobustnessThresholds thresholds;
  RansacConfig ransac;
  GnConfig gn = tracking_gn_defaults();
  int adapt_steps = 2;
  double lr_depth = 1e-2;
  double lr_flow = 1e-1;
  double lr_uncertainty = 1e-2;
  bool filter_enabled = true;
  bool adapt_enabled = true;
  bool gn_enabled = true;
  double provider_sigma_rel = 0.6;
  double provider_gamma = 0.1;
  std::uint64_t seed = 1;
};

// Reads every field from dotted keys (camera.fx, select.delta1,
// ransac.threshold, gn.iterations, adapt.lr_depth, filter.enabled, ...),
// falling back to the defaults above.
PipelineConfig pipeline_config_from(const Config& cfg);

// Tracking reference: its image anchors photometric refinement, its filter
// grid holds the depth state, its adaptation grids stand in for per-frame
// network predictions.
struct Keyframe {
  int id = -1;
  double timestamp = 0;
  Image image;
  DepthFilterGrid grid;
  Se3 world;  // camera-to-world
  AdaptableGrids grids;
  Image base_depth;  // prior as applied at creation
  Image base_sigma;
  double carry_depth_at_init = 0;  // running log corrections when created
  double carry_sigma_at_init = 0;
};

struct FrameRecord {
  int frame = -1;
  double timestamp = 0;
  Se3 world;     // camera-to-world
  Se3 relative;  // world = previous world * relative
  int keyframe_id = -1;
  bool tracked = false;
  bool is_keyframe = false;
  std::string solver;  // "init", "essential", "pnp", "held"
  double scale = 1.0;  // metric scale applied to the unit-baseline pose
  int correspondences = 0;
  int inliers = 0;
  LossBreakdown losses;
  std::string note;
};

// Depth-grid audit entry: state hash after each mutation pass.
struct MutationEvent {
  int frame = -1;
  std::string source;  // "init_from_prior", "filter_update", "gn_refine"
  std::uint64_t checksum = 0;
};

struct PipelineResult {
  Trajectory trajectory;
  std::vector<FrameRecord> records;
  std::vector<MutationEvent> mutations;
  // (keyframe id, final expected-depth map) per retired keyframe + the last
  std::vector<std::pair<int, Image>> depth_snapshots;
  int keyframes = 0;
  int tracking_lost = 0;
};

std::uint64_t grid_checksum(const DepthFilterGrid& grid);

// Sequential per-frame tracking loop: flow query, robust selection, pose
// solve with scale recovery, triangulation, Bayesian depth update,
// photometric refinement, flow synthesis, grid adaptation, keyframe
// promotion. Pose failures hold the last pose and force a keyframe at the
// next frame.
class Pipeline {
 public:
  Pipeline(const PipelineConfig& cfg, FlowProvider& flow,
           DepthProvider& depth);

  FrameRecord process_frame(const Image& image, double timestamp);

  const Trajectory& trajectory() const { return trajectory_; }
  const std::vector<FrameRecord>& records() const { return records_; }
  const std::vector<MutationEvent>& mutations() const { return mutations_; }
  const std::optional<Keyframe>& keyframe() const { return keyframe_; }
  int keyframes() const { return keyframes_; }
  int tracking_lost() const { return tracking_lost_; }

  PipelineResult finish();

 private:
  void make_keyframe(int id, double timestamp, const Image& image,
                     const Se3& world);
  bool solve_pose(const CorrespondenceSet& cs, Se3* T_kt, double* scale,
                  std::string* solver, int* inliers, SparseDepthMap* sparse,
                  std::string* note);
  void push_mutation(int frame, const char* source);

  PipelineConfig cfg_;
  FlowProvider* flow_;
  DepthProvider* depth_;
  std::optional<Keyframe> keyframe_;
  Trajectory trajectory_;
  std::vector<FrameRecord> records_;
  std::vector<MutationEvent> mutations_;
  std::vector<std::pair<int, Image>> snapshots_;
  int next_frame_ = 0;
  bool force_keyframe_ = false;
  int keyframes_ = 0;
  int tracking_lost_ = 0;
  double carry_log_depth_ = 0;
  double carry_log_sigma_ = 0;
  double carry_log_gamma_ = 0;
  // previous frame, kept for held poses and missing-pair promotion
  Image last_image_;
  double last_timestamp_ = 0;
  Se3 last_world_;
  int last_id_ = -1;
};

// Folds process_frame over the source. Throws EmptySet below 2 frames.
PipelineResult run_sequence(const PipelineConfig& cfg, FrameSource& source,
                            FlowProvider& flow, DepthProvider& depth);

}  // namespace vo
