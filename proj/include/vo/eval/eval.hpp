// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vo/core/se3.hpp"
#include "vo/core/types.hpp"

namespace vo {

// One stamped world pose of a trajectory.
struct TrajectoryEntry {
  double timestamp = 0.0;
  Se3 pose;
};

// Timestamps strictly increasing.
struct Trajectory {
  std::vector<TrajectoryEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

struct MetricReport {
  double t_err = 0.0;      // translational drift, percent
  double r_err = 0.0;      // rotational drift, degrees per 100 m
  double ate_rmse = 0.0;   // meters
  double rpe_trans = 0.0;  // meters per second
  double scale = 1.0;      // alignment factor applied to the estimate
  bool drift_valid = false;  // t_err/r_err defined only on paths >= 100 m
};

struct ScaleAlignment {
  Trajectory aligned;
  double factor = 1.0;
};

struct DriftErrors {
  double t_err = 0.0;
  double r_err = 0.0;
};

struct RpeAte {
  double rpe_trans = 0.0;
  double ate_rmse = 0.0;
};

// Nearest-timestamp association window, seconds.
inline constexpr double kAssociationWindow = 0.02;

// Pairs (estimate index, truth index), strictly increasing in both,
// each nearest in time within the window.
std::vector<std::pair<std::size_t, std::size_t>> associate(
    const Trajectory& estimate, const Trajectory& truth,
    double window = kAssociationWindow);

// Single positive factor on estimate translations minimizing summed squared
// position error over associated pairs, anchored at the first matched pose.
// Rotations are untouched. Throws AssociationFailure below 2 pairs.
ScaleAlignment align_scale(const Trajectory& estimate,
                           const Trajectory& truth);

// Sub-sequence drift: for every matched start pose and each segment length
// in {100,...,800} m along the truth path, relative-pose error divided by
// the segment length, RMSE-aggregated. Expects pre-aligned trajectories.
// Throws PathTooShort when no 100 m segment exists.
DriftErrors kitti_drift(const Trajectory& estimate, const Trajectory& truth);

// Fixed-delta relative pose error (m/s) and absolute trajectory RMSE (m)
// after single-scale plus rigid alignment. Throws AssociationFailure when
// no pose pairs exist at the requested delta.
RpeAte rpe_ate(const Trajectory& estimate, const Trajectory& truth,
               double delta_seconds);

// |s_tail / s_head - 1| where s_head, s_tail are the scale factors fitted on
// the first and last 20% of associated poses. Throws AssociationFailure
// below 10 pairs.
double scale_drift(const Trajectory& estimate, const Trajectory& truth);

// Scale-aligns the estimate, then evaluates every metric against the truth.
// Drift errors are reported only when the path reaches 100 m.
MetricReport evaluate(const Trajectory& estimate, const Trajectory& truth,
                      double rpe_delta_seconds = 1.0);

// File formats. TUM: "timestamp tx ty tz qx qy qz qw" per line, '#' comments.
// KITTI: 12 row-major entries of the 3x4 pose per line, one pose per line,
// timestamps synthesized as the line index. Parse failures throw ParseError
// naming the line.
Trajectory read_tum(const std::string& path);
Trajectory read_kitti(const std::string& path);
// Detects the format from the first data line's token count (8 or 12).
Trajectory read_trajectory(const std::string& path);
void write_tum(const Trajectory& trajectory, const std::string& path);
void write_kitti(const Trajectory& trajectory, const std::string& path);

// Aligned-trajectory CSV (timestamp,tx,ty,tz,qx,qy,qz,qw) for plotting.
void write_trajectory_csv(const Trajectory& trajectory,
                          const std::string& path);

std::string report_to_json(const MetricReport& report);

}  // namespace vo
