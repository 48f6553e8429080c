// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vo/core/camera.hpp"
#include "vo/core/image.hpp"
#include "vo/core/rng.hpp"
#include "vo/core/se3.hpp"
#include "vo/flow/flow.hpp"

namespace vo {

// Band-limited procedural texture over plane coordinates (u, v) in meters:
// base + sum of sinusoids. Amplitudes sum to <= 0.45 around base 0.5 so
// values stay inside [0, 1] analytically.
struct TextureWave {
  double amp = 0, fu = 0, fv = 0, phase = 0;  // frequencies in cycles/m
};

struct TextureSpec {
  double base = 0.5;
  std::vector<TextureWave> waves;

  double value(double u, double v) const;
};

// Textured plane: point + unit normal + in-plane orthonormal axes. Extents
// bound the plane coordinates; the defaults make it effectively infinite.
struct PlaneSpec {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double u_min = -1e9, u_max = 1e9;
  double v_min = -1e9, v_max = 1e9;
  TextureSpec texture;
};

// Camera-to-world pose path: linear velocity, optional lateral sway and a
// constant body-rate rotation, all per frame index.
struct TrajectorySpec {
  Vec3 start = Vec3::Zero();
  Vec3 velocity = Vec3(0, 0, 0.17);  // m/frame
  Vec3 rot_rate = Vec3::Zero();      // axis-angle per frame
  double sway_amp = 0;               // lateral x sinusoid, m
  double sway_period = 25;           // frames
};

struct SceneSpec {
  CameraIntrinsics K{100.0, 100.0, 63.5, 47.5, 128, 96};
  std::vector<PlaneSpec> planes;
  TrajectorySpec trajectory;
  std::uint64_t seed = 1;
  int num_frames = 60;
};

// Camera-to-world pose of a frame.
Se3 pose_at(const SceneSpec& spec, int frame);

struct RenderOut {
  Image intensity;   // 2x2 supersampled texture
  Image depth;       // exact camera-z of the center ray; 0 where no hit
  Mask depth_valid;
  Se3 T_wc;
};

RenderOut render(const SceneSpec& spec, int frame);

// Exact scene depth (camera z) along the ray of a continuous pixel
// position. Returns false when the ray leaves the scene.
bool scene_depth(const SceneSpec& spec, const Se3& T_wc, const Vec2& pixel,
                 double* depth);

// Exact flow of a continuous pixel from frame i into frame j. valid is
// false when the point leaves the view or is occluded in frame j.
Vec2 flow_at(const SceneSpec& spec, int i, int j, const Vec2& p, bool* valid);

struct FlowPair {
  FlowField forward, backward;
  Mask valid_forward, valid_backward;  // visible, in-bounds, unoccluded
};

FlowPair ground_truth_flow(const SceneSpec& spec, int i, int j);

// Corridor with floor, ceiling, two walls and an end cap, textured from the
// seed; the default trajectory advances 10 m over 60 frames.
SceneSpec make_corridor(std::uint64_t seed, int num_frames = 60);

// Single fronto-parallel wall at the given distance.
SceneSpec make_wall(std::uint64_t seed, double distance);

struct NoiseSpec {
  double flow_sigma = 0;               // px, per component
  double flow_outlier_fraction = 0;
  double flow_outlier_magnitude = 20;  // px
  double depth_bias = 1.0;             // multiplicative
  double depth_log_sigma = 0;          // log-normal per pixel
  double depth_log_sigma_global = 0;   // log-normal per map
  double intensity_sigma = 0;
  double exposure_gain_drift = 0;      // linear ramp per frame
  double exposure_offset_drift = 0;
};

struct CorruptionRecord {
  Mask outlier_forward, outlier_backward;
  double gain = 1.0, offset = 0.0;
};

FlowField corrupt_flow(const FlowField& f, const NoiseSpec& n, Rng& rng,
                       Mask* outliers = nullptr);
Image corrupt_depth(const Image& d, const NoiseSpec& n, Rng& rng);
// frame index drives the deterministic exposure ramp
Image corrupt_intensity(const Image& img, const NoiseSpec& n, int frame,
                        Rng& rng, double* gain = nullptr,
                        double* offset = nullptr);

struct CleanBundle {
  FlowField forward, backward;
  Image depth;
  Image intensity;
  int frame = 0;
};

struct NoisyBundle {
  FlowField forward, backward;
  Image depth;
  Image intensity;
  CorruptionRecord record;
};

// Applies every noise component with a fixed draw order so a (bundle, noise,
// seed) triple is bit-reproducible.
NoisyBundle corrupt(const CleanBundle& clean, const NoiseSpec& noise,
                    std::uint64_t seed);

}  // namespace vo
