// SPDX-License-Identifier: Apache-2.0
#include "vo/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vo/core/errors.hpp"
#include "vo/core/geometry.hpp"

namespace vo {

double TextureSpec::value(double u, double v) const {
  double s = base;
  for (const auto& w : waves)
    s += w.amp * std::sin(2.0 * M_PI * (w.fu * u + w.fv * v) + w.phase);
  return s;
}

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  const PlaneSpec* plane = nullptr;
  double u = 0, v = 0;
};

// Nearest plane hit along C + t D. With D built from an unnormalized pixel
// ray (z component 1 in the camera frame), t is the camera-z depth.
Hit cast_ray(const SceneSpec& spec, const Vec3& C, const Vec3& D) {
  Hit best;
  for (const auto& pl : spec.planes) {
    const double denom = D.dot(pl.normal);
    if (std::abs(denom) < 1e-12) continue;
    const double t = (pl.point - C).dot(pl.normal) / denom;
    if (t <= 1e-9 || t >= best.t) continue;
    const Vec3 X = C + t * D;
    const Vec3 rel = X - pl.point;
    const double u = rel.dot(pl.axis_u);
    const double v = rel.dot(pl.axis_v);
    if (u < pl.u_min || u > pl.u_max || v < pl.v_min || v > pl.v_max)
      continue;
    best.t = t;
    best.plane = &pl;
    best.u = u;
    best.v = v;
  }
  return best;
}

Hit cast_pixel(const SceneSpec& spec, const Se3& T_wc, const Vec2& pixel) {
  const Vec3 d_cam = spec.K.ray(pixel);
  return cast_ray(spec, T_wc.translation(), T_wc.rotation() * d_cam);
}

TextureSpec make_texture(Rng& rng) {
  TextureSpec tex;
  tex.base = 0.5;
  std::vector<double> raw(20);
  double total = 0;
  for (auto& a : raw) {
    a = rng.uniform(0.5, 1.0);
    total += a;
  }
  for (double a : raw) {
    TextureWave w;
    w.amp = 0.45 * a / total;
    // Band-limited so distant surfaces stay below the pixel Nyquist rate;
    // aliased texture would put a noise floor under photometric alignment.
    w.fu = rng.uniform(0.05, 0.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    w.fv = rng.uniform(0.05, 0.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    w.phase = rng.uniform(0.0, 2.0 * M_PI);
    tex.waves.push_back(w);
  }
  return tex;
}

PlaneSpec make_plane(const Vec3& point, const Vec3& normal, Rng& rng) {
  PlaneSpec pl;
  pl.point = point;
  pl.normal = normal.normalized();
  const Vec3 ref =
      std::abs(pl.normal.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  pl.axis_u = pl.normal.cross(ref).normalized();
  pl.axis_v = pl.normal.cross(pl.axis_u);
  pl.texture = make_texture(rng);
  return pl;
}

}  // namespace

Se3 pose_at(const SceneSpec& spec, int frame) {
  const auto& tr = spec.trajectory;
  Vec3 pos = tr.start + tr.velocity * static_cast<double>(frame);
  if (tr.sway_amp != 0)
    pos.x() += tr.sway_amp *
               std::sin(2.0 * M_PI * static_cast<double>(frame) /
                        tr.sway_period);
  Vec6 xi = Vec6::Zero();
  xi.tail<3>() = tr.rot_rate * static_cast<double>(frame);
  const Se3 rot = Se3::exp(xi);
  return Se3(rot.rotation(), pos);
}

RenderOut render(const SceneSpec& spec, int frame) {
  const int w = spec.K.width, h = spec.K.height;
  RenderOut out;
  out.T_wc = pose_at(spec, frame);
  out.intensity = Image(w, h, 0.0);
  out.depth = Image(w, h, 0.0);
  out.depth_valid = Mask(w, h, false);

  int visible = 0;
  const double off[4][2] = {
      {-0.25, -0.25}, {0.25, -0.25}, {-0.25, 0.25}, {0.25, 0.25}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Hit center = cast_pixel(spec, out.T_wc, Vec2(x, y));
      if (center.plane) {
        out.depth.at(x, y) = center.t;
        out.depth_valid.set(x, y, true);
        ++visible;
      }
      double acc = 0;
      for (const auto& o : off) {
        const Hit s = cast_pixel(spec, out.T_wc, Vec2(x + o[0], y + o[1]));
        if (s.plane) acc += s.plane->texture.value(s.u, s.v);
      }
      out.intensity.at(x, y) = 0.25 * acc;
    }
  if (visible == 0) throw EmptyView("no scene geometry visible");
  return out;
}

bool scene_depth(const SceneSpec& spec, const Se3& T_wc, const Vec2& pixel,
                 double* depth) {
  const Hit hit = cast_pixel(spec, T_wc, pixel);
  if (!hit.plane) return false;
  *depth = hit.t;
  return true;
}

Vec2 flow_at(const SceneSpec& spec, int i, int j, const Vec2& p,
             bool* valid) {
  *valid = false;
  const Se3 T_i = pose_at(spec, i);
  const Se3 T_j = pose_at(spec, j);
  const Hit hit = cast_pixel(spec, T_i, p);
  if (!hit.plane) return Vec2::Zero();
  const Vec3 X_world = T_i * (hit.t * spec.K.ray(p));
  const Vec3 X_j = T_j.inverse() * X_world;
  if (!(X_j.z() > 1e-9)) return Vec2::Zero();
  const Vec2 q = project(spec.K, X_j);
  if (!spec.K.contains(q)) return q - p;
  double vis_depth = 0;
  if (!scene_depth(spec, T_j, q, &vis_depth)) return q - p;
  if (X_j.z() > vis_depth * (1.0 + 1e-6) + 1e-6) return q - p;  // occluded
  *valid = true;
  return q - p;
}

FlowPair ground_truth_flow(const SceneSpec& spec, int i, int j) {
  const int w = spec.K.width, h = spec.K.height;
  FlowPair out;
  out.forward = FlowField(w, h);
  out.backward = FlowField(w, h);
  out.valid_forward = Mask(w, h, false);
  out.valid_backward = Mask(w, h, false);
  out.forward.source_frame = i;
  out.forward.target_frame = j;
  out.backward.source_frame = j;
  out.backward.target_frame = i;

  int any = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool ok = false;
      const Vec2 f = flow_at(spec, i, j, Vec2(x, y), &ok);
      out.forward.set(x, y, f);
      out.valid_forward.set(x, y, ok);
      any += ok;
      const Vec2 b = flow_at(spec, j, i, Vec2(x, y), &ok);
      out.backward.set(x, y, b);
      out.valid_backward.set(x, y, ok);
    }
  if (any == 0) throw EmptyView("no pixel visible in both frames");
  return out;
}

SceneSpec make_corridor(std::uint64_t seed, int num_frames) {
  SceneSpec spec;
  spec.seed = seed;
  spec.num_frames = num_frames;
  Rng rng(seed);
  Rng tex = rng.fork(1);
  spec.planes.push_back(make_plane(Vec3(0, 1.5, 0), Vec3(0, -1, 0), tex));
  spec.planes.push_back(make_plane(Vec3(0, -1.5, 0), Vec3(0, 1, 0), tex));
  spec.planes.push_back(make_plane(Vec3(-2, 0, 0), Vec3(1, 0, 0), tex));
  spec.planes.push_back(make_plane(Vec3(2, 0, 0), Vec3(-1, 0, 0), tex));
  spec.planes.push_back(make_plane(Vec3(0, 0, 60), Vec3(0, 0, -1), tex));
  spec.trajectory.velocity = Vec3(0, 0, 0.17);
  spec.trajectory.sway_amp = 0.15;
  spec.trajectory.sway_period = 25;
  return spec;
}

SceneSpec make_wall(std::uint64_t seed, double distance) {
  SceneSpec spec;
  spec.seed = seed;
  Rng rng(seed);
  Rng tex = rng.fork(1);
  spec.planes.push_back(
      make_plane(Vec3(0, 0, distance), Vec3(0, 0, -1), tex));
  spec.trajectory.velocity = Vec3::Zero();
  spec.trajectory.sway_amp = 0;
  return spec;
}

FlowField corrupt_flow(const FlowField& f, const NoiseSpec& n, Rng& rng,
                       Mask* outliers) {
  FlowField out = f;
  if (outliers) *outliers = Mask(f.width, f.height, false);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      const size_t k = f.idx(x, y);
      if (n.flow_sigma > 0) {
        out.dx[k] += rng.normal(0.0, n.flow_sigma);
        out.dy[k] += rng.normal(0.0, n.flow_sigma);
      }
      if (n.flow_outlier_fraction > 0 &&
          rng.uniform() < n.flow_outlier_fraction) {
        const double ang = rng.uniform(0.0, 2.0 * M_PI);
        out.dx[k] += n.flow_outlier_magnitude * std::cos(ang);
        out.dy[k] += n.flow_outlier_magnitude * std::sin(ang);
        if (outliers) outliers->set(x, y, true);
      }
    }
  return out;
}

Image corrupt_depth(const Image& d, const NoiseSpec& n, Rng& rng) {
  Image out = d;
  double map_scale = n.depth_bias;
  if (n.depth_log_sigma_global > 0)
    map_scale *= std::exp(rng.normal(0.0, n.depth_log_sigma_global));
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) {
      double scale = map_scale;
      if (n.depth_log_sigma > 0)
        scale *= std::exp(rng.normal(0.0, n.depth_log_sigma));
      out.at(x, y) *= scale;
    }
  return out;
}

Image corrupt_intensity(const Image& img, const NoiseSpec& n, int frame,
                        Rng& rng, double* gain, double* offset) {
  const double g = 1.0 + n.exposure_gain_drift * frame;
  const double o = n.exposure_offset_drift * frame;
  if (gain) *gain = g;
  if (offset) *offset = o;
  Image out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double v = g * img.at(x, y) + o;
      if (n.intensity_sigma > 0) v += rng.normal(0.0, n.intensity_sigma);
      out.at(x, y) = std::clamp(v, 0.0, 1.0);
    }
  return out;
}

NoisyBundle corrupt(const CleanBundle& clean, const NoiseSpec& noise,
                    std::uint64_t seed) {
  Rng rng(seed);
  NoisyBundle out;
  out.forward = corrupt_flow(clean.forward, noise, rng,
                             &out.record.outlier_forward);
  out.backward = corrupt_flow(clean.backward, noise, rng,
                              &out.record.outlier_backward);
  out.depth = corrupt_depth(clean.depth, noise, rng);
  out.intensity = corrupt_intensity(clean.intensity, noise, clean.frame, rng,
                                    &out.record.gain, &out.record.offset);
  return out;
}

}  // namespace vo
