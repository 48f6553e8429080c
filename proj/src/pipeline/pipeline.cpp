// SPDX-License-Identifier: Apache-2.0
#include "vo/pipeline/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>

#include "vo/core/errors.hpp"
#include "vo/core/geometry.hpp"
#include "vo/tri/triangulation.hpp"

namespace vo {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

// Mean of log(after/before) over pixels valid in the mask; 0 when empty.
double mean_log_ratio(const Image& after, const Image& before,
                      const Mask& valid) {
  double sum = 0;
  int count = 0;
  for (int y = 0; y < after.height(); ++y) {
    for (int x = 0; x < after.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const double a = after.at(x, y);
      const double b = before.at(x, y);
      if (a > 0 && b > 0) {
        sum += std::log(a / b);
        ++count;
      }
    }
  }
  return count ? sum / count : 0.0;
}

void scale_image(Image& img, double factor) {
  double* p = img.data();
  for (std::size_t i = 0; i < img.size(); ++i) p[i] *= factor;
}

}  // namespace

std::uint64_t grid_checksum(const DepthFilterGrid& grid) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ULL;
    }
  };
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const DepthFilterState& s = grid.at(x, y);
      mix(std::bit_cast<std::uint64_t>(s.mu));
      mix(std::bit_cast<std::uint64_t>(s.sigma2));
      mix(std::bit_cast<std::uint64_t>(s.a));
      mix(std::bit_cast<std::uint64_t>(s.b));
      mix((grid.valid.at(x, y) ? 1u : 0u) | (s.failed ? 2u : 0u) |
          (s.converged ? 4u : 0u));
    }
  }
  return h;
}

PipelineConfig pipeline_config_from(const Config& c) {
  PipelineConfig p;
  p.camera = CameraIntrinsics{
      c.get_double("camera.fx", p.camera.fx),
      c.get_double("camera.fy", p.camera.fy),
      c.get_double("camera.cx", p.camera.cx),
      c.get_double("camera.cy", p.camera.cy),
      c.get_int("camera.width", p.camera.width),
      c.get_int("camera.height", p.camera.height)};
  p.thresholds.delta1 = c.get_double("select.delta1", p.thresholds.delta1);
  p.thresholds.delta2 = c.get_double("select.delta2", p.thresholds.delta2);
  p.thresholds.keyframe_mean_flow =
      c.get_double("select.keyframe_mean_flow", p.thresholds.keyframe_mean_flow);
  p.thresholds.max_correspondences = static_cast<std::size_t>(c.get_int(
      "select.max_correspondences",
      static_cast<int>(p.thresholds.max_correspondences)));
  p.ransac.max_iterations =
      c.get_int("ransac.max_iterations", p.ransac.max_iterations);
  p.ransac.epipolar_threshold =
      c.get_double("ransac.threshold", p.ransac.epipolar_threshold);
  p.ransac.confidence = c.get_double("ransac.confidence", p.ransac.confidence);
  p.gn.iterations = c.get_int("gn.iterations", p.gn.iterations);
  p.gn.lambda0 = c.get_double("gn.lambda0", p.gn.lambda0);
  p.gn.damped = c.get_bool("gn.damped", p.gn.damped);
  p.gn.gradient_min = c.get_double("gn.gradient_min", p.gn.gradient_min);
  p.adapt_steps = c.get_int("adapt.steps", p.adapt_steps);
  p.lr_depth = c.get_double("adapt.lr_depth", p.lr_depth);
  p.lr_flow = c.get_double("adapt.lr_flow", p.lr_flow);
  p.lr_uncertainty = c.get_double("adapt.lr_uncertainty", p.lr_uncertainty);
  p.adapt_enabled = c.get_bool("adapt.enabled", p.adapt_enabled);
  p.filter_enabled = c.get_bool("filter.enabled", p.filter_enabled);
  p.gn_enabled = c.get_bool("gn.enabled", p.gn_enabled);
  p.provider_sigma_rel =
      c.get_double("provider.sigma_rel", p.provider_sigma_rel);
  p.provider_gamma = c.get_double("provider.gamma", p.provider_gamma);
  p.seed = c.get_u64("seed", p.seed);
  return p;
}

Pipeline::Pipeline(const PipelineConfig& cfg, FlowProvider& flow,
                   DepthProvider& depth)
    : cfg_(cfg), flow_(&flow), depth_(&depth) {}

void Pipeline::push_mutation(int frame, const char* source) {
  mutations_.push_back({frame, source, grid_checksum(keyframe_->grid)});
}

void Pipeline::make_keyframe(int id, double timestamp, const Image& image,
                             const Se3& world) {
  if (keyframe_) {
    snapshots_.emplace_back(keyframe_->id,
                            keyframe_->grid.expected_depth_map());
  }
  DepthQueryResult q = depth_->query(id);
  if (cfg_.adapt_enabled) {
    if (keyframe_) {
      // The outgoing keyframe's refined depth, transported into the new
      // view, re-gauges the fresh prior: the per-map scale error of the
      // depth source is measured against geometry instead of trusted.
      const Se3 T_no = world.inverse() * keyframe_->world;
      const DepthFilterGrid& og = keyframe_->grid;
      std::vector<double> logs_conv, logs_all;
      for (int y = 0; y < og.height; y += 2) {
        for (int x = 0; x < og.width; x += 2) {
          if (!og.usable(x, y) || og.at(x, y).mu <= 0) continue;
          const Vec3 Xn = T_no * unproject(cfg_.camera, Vec2(x, y),
                                           og.at(x, y).expected_depth());
          if (Xn.z() <= 0) continue;
          const Vec2 uv = project(cfg_.camera, Xn);
          const int u = static_cast<int>(std::lround(uv.x()));
          const int v = static_cast<int>(std::lround(uv.y()));
          if (u < 0 || v < 0 || u >= q.depth.width() || v >= q.depth.height())
            continue;
          if (!q.valid.at(u, v) || q.depth.at(u, v) <= 0) continue;
          const double lr = std::log(Xn.z()) - std::log(q.depth.at(u, v));
          logs_all.push_back(lr);
          if (og.at(x, y).converged) logs_conv.push_back(lr);
        }
      }
      std::vector<double>& logs = logs_conv.size() >= 50 ? logs_conv : logs_all;
      if (logs.size() >= 50) {
        auto mid = logs.begin() + static_cast<std::ptrdiff_t>(logs.size() / 2);
        std::nth_element(logs.begin(), mid, logs.end());
        carry_log_depth_ = *mid;
        carry_log_sigma_ = -*mid;
      }
    }
    scale_image(q.depth, std::exp(carry_log_depth_));
    scale_image(q.sigma, std::exp(carry_log_sigma_));
  }
  Keyframe kf;
  kf.id = id;
  kf.timestamp = timestamp;
  kf.image = image;
  kf.world = world;
  kf.grid = init_from_prior(q.depth, q.sigma, &q.valid);
  kf.grids.depth = q.depth;
  kf.grids.sigma = q.sigma;
  kf.grids.flow = FlowField(image.width(), image.height());
  kf.grids.gamma = Image(image.width(), image.height(), cfg_.provider_gamma);
  kf.grids.lr_depth = cfg_.lr_depth;
  kf.grids.lr_flow = cfg_.lr_flow;
  kf.grids.lr_uncertainty = cfg_.lr_uncertainty;
  kf.base_depth = q.depth;
  kf.base_sigma = q.sigma;
  kf.carry_depth_at_init = carry_log_depth_;
  kf.carry_sigma_at_init = carry_log_sigma_;
  keyframe_ = std::move(kf);
  ++keyframes_;
  push_mutation(id, "init_from_prior");
}

bool Pipeline::solve_pose(const CorrespondenceSet& cs, Se3* T_kt,
                          double* scale, std::string* solver, int* inliers,
                          SparseDepthMap* sparse, std::string* note) {
  // Scale recovery aligns unit-baseline triangulations against the keyframe
  // depth prior. The prior is fixed for the keyframe's lifetime so fusion
  // noise cannot feed back into the metric gauge; gauge continuity across
  // keyframes comes from the adaptation carry instead.
  const DepthFilterGrid& grid = keyframe_->grid;
  const Image& prior = keyframe_->base_depth;
  int usable = 0;
  for (int y = 0; y < grid.height && usable < 4; ++y) {
    for (int x = 0; x < grid.width && usable < 4; ++x) {
      if (grid.valid.at(x, y) && prior.at(x, y) > 0) ++usable;
    }
  }
  RansacConfig rc = cfg_.ransac;
  rc.rng_seed = splitmix(cfg_.seed ^ (0xE55E0000ULL + static_cast<std::uint64_t>(
                                          next_frame_)));

  try {
    SolverDecision dec = select_solver(cs, cfg_.camera, rc, usable >= 4);
    std::vector<std::uint8_t> mask;
    if (dec.choice == SolverChoice::Essential && dec.essential) {
      const EssentialEstimate& ee = *dec.essential;
      // unit-baseline triangulation, paired against the keyframe prior
      std::vector<double> tri_d, prior_d;
      for (std::size_t i = 0; i < cs.size(); ++i) {
        if (!ee.inlier_mask[i]) continue;
        try {
          TriangulationResult tr = midpoint_triangulate(
              cs.pairs[i].p_k, cs.pairs[i].p_t, ee.pose, cfg_.camera);
          const int x = static_cast<int>(cs.pairs[i].p_k.x());
          const int y = static_cast<int>(cs.pairs[i].p_k.y());
          if (grid.valid.at(x, y) && prior.at(x, y) > 0) {
            tri_d.push_back(tr.depth);
            prior_d.push_back(prior.at(x, y));
          }
        } catch (const ParallelRays&) {
        } catch (const NegativeDepth&) {
        }
      }
      const double s = recover_scale(tri_d, prior_d);
      *T_kt = Se3(ee.pose.rotation(), s * ee.pose.translation());
      *scale = s;
      *solver = "essential";
      *inliers = ee.num_inliers;
      mask = ee.inlier_mask;
    } else {
      std::vector<Vec3> points;
      std::vector<Vec2> pixels;
      for (const auto& c : cs.pairs) {
        const int x = static_cast<int>(c.p_k.x());
        const int y = static_cast<int>(c.p_k.y());
        if (!grid.usable(x, y) || grid.at(x, y).mu <= 0) continue;
        points.push_back(
            unproject(cfg_.camera, c.p_k, grid.at(x, y).expected_depth()));
        pixels.push_back(c.p_t);
      }
      *T_kt = solve_pnp(points, pixels, cfg_.camera, rc);
      *scale = 1.0;
      *solver = "pnp";
      *inliers = static_cast<int>(points.size());
      mask.assign(cs.size(), 1);
    }

    // Metric-scale triangulation feeding the depth filter. Frames routed
    // away from the two-view solver failed the observability test, so their
    // triangulations are noise-dominated and the filter keeps its state.
    if (dec.choice == SolverChoice::Essential) {
      for (std::size_t i = 0; i < cs.size(); ++i) {
        if (!mask[i]) continue;
        try {
          TriangulationResult tr = midpoint_triangulate(
              cs.pairs[i].p_k, cs.pairs[i].p_t, *T_kt, cfg_.camera);
          SparseDepthEntry e;
          e.x = static_cast<int>(cs.pairs[i].p_k.x());
          e.y = static_cast<int>(cs.pairs[i].p_k.y());
          e.depth = tr.depth;
          e.residual = tr.residual;
          sparse->entries.push_back(e);
        } catch (const ParallelRays&) {
        } catch (const NegativeDepth&) {
        }
      }
    }
    return true;
  } catch (const InsufficientCorrespondences& e) {
    *note = e.what();
  } catch (const DegenerateConfiguration& e) {
    *note = e.what();
  } catch (const NonConvergence& e) {
    *note = e.what();
  } catch (const InsufficientOverlap& e) {
    *note = e.what();
  } catch (const NoViableSolver& e) {
    *note = e.what();
  }
  return false;
}

FrameRecord Pipeline::process_frame(const Image& image, double timestamp) {
  const int t = next_frame_++;
  FrameRecord rec;
  rec.frame = t;
  rec.timestamp = timestamp;

  if (!keyframe_ || force_keyframe_) {
    const Se3 world = keyframe_ ? last_world_ : Se3::identity();
    make_keyframe(t, timestamp, image, world);
    force_keyframe_ = false;
    rec.world = world;
    rec.relative = Se3::identity();
    rec.keyframe_id = t;
    rec.tracked = true;
    rec.is_keyframe = true;
    rec.solver = "init";
    trajectory_.entries.push_back({timestamp, world});
    last_image_ = image;
    last_timestamp_ = timestamp;
    last_world_ = world;
    last_id_ = t;
    records_.push_back(rec);
    return rec;
  }

  if (!flow_->available(keyframe_->id, t) && last_id_ != keyframe_->id) {
    // provider cannot span this pair: promote the previous frame
    make_keyframe(last_id_, last_timestamp_, last_image_, last_world_);
    rec.note = "keyframe promoted: flow pair unavailable";
  }

  auto hold_pose = [&](const std::string& why) {
    ++tracking_lost_;
    force_keyframe_ = true;
    rec.world = last_world_;
    rec.relative = Se3::identity();
    rec.keyframe_id = keyframe_->id;
    rec.tracked = false;
    rec.solver = "held";
    if (!rec.note.empty()) rec.note += "; ";
    rec.note += "tracking lost: " + why;
    trajectory_.entries.push_back({timestamp, last_world_});
    last_image_ = image;
    last_timestamp_ = timestamp;
    last_id_ = t;
    records_.push_back(rec);
    return rec;
  };

  if (!flow_->available(keyframe_->id, t)) {
    return hold_pose("flow pair unavailable");
  }

  FlowQueryResult fq = flow_->query(keyframe_->id, t);
  CorrespondenceSet cs =
      select_robust(fq.forward, fq.backward, cfg_.thresholds);
  rec.correspondences = static_cast<int>(cs.size());
  rec.keyframe_id = keyframe_->id;

  Se3 T_kt;
  SparseDepthMap sparse;
  sparse.frame = keyframe_->id;
  if (!solve_pose(cs, &T_kt, &rec.scale, &rec.solver, &rec.inliers, &sparse,
                  &rec.note)) {
    return hold_pose(rec.note.empty() ? "pose solve failed" : rec.note);
  }
  rec.tracked = true;

  DepthFilterGrid& grid = keyframe_->grid;
  DensifiedDepthPatchMap dense =
      densify_patches(sparse, grid.width, grid.height);

  // target pixel of each sparse source, for the epipolar variance
  std::unordered_map<int, Vec2> target_of;
  for (const auto& c : cs.pairs) {
    target_of[static_cast<int>(c.p_k.y()) * grid.width +
              static_cast<int>(c.p_k.x())] = c.p_t;
  }

  if (cfg_.filter_enabled && !dense.entries.empty()) {
    for (const auto& e : dense.entries) {
      if (!grid.valid.at(e.x, e.y)) continue;
      auto it = target_of.find(e.src_y * grid.width + e.src_x);
      if (it == target_of.end()) continue;
      DepthFilterState& s = grid.at(e.x, e.y);
      DepthMeasurement m;
      m.z = 1.0 / e.depth;
      try {
        m.tau2 = measurement_variance(Vec2(e.src_x, e.src_y), it->second,
                                      T_kt, cfg_.camera);
      } catch (const ParallelRays&) {
        continue;  // variance undefined, skip the measurement
      } catch (const NegativeDepth&) {
        continue;
      }
      update(s, m);
      check_convergence(s);
    }
    push_mutation(t, "filter_update");
  }

  // photometric refinement of depth and the frame pose
  Image gamma = fq.gamma;
  if (cfg_.adapt_enabled && carry_log_gamma_ != 0.0) {
    scale_image(gamma, std::exp(carry_log_gamma_));
    double* g = gamma.data();
    for (std::size_t i = 0; i < gamma.size(); ++i) {
      g[i] = std::max(g[i], cfg_.gn.gamma_floor);
    }
  }
  if (cfg_.gn_enabled && cfg_.gn.iterations > 0) {
    try {
      std::vector<FrameObservation> frames;
      frames.push_back({image, gamma, T_kt});
      const OptimizeResult gn =
          optimize(keyframe_->image, frames, grid, cfg_.camera, cfg_.gn);
      // The pose refinement is adopted; per-pixel photometric depth from a
      // single pair is interpolation-limited, so the Bayesian grid stays
      // the refined depth map.
      T_kt = gn.pose;
    } catch (const EmptySystem&) {
      if (!rec.note.empty()) rec.note += "; ";
      rec.note += "refinement skipped: no usable residuals";
    } catch (const SingularSystem& e) {
      if (!rec.note.empty()) rec.note += "; ";
      rec.note += std::string("refinement skipped: ") + e.what();
    }
  }

  const Se3 world_t = keyframe_->world * T_kt.inverse();
  rec.world = world_t;
  rec.relative = last_world_.inverse() * world_t;

  // self-supervision targets from the refined state
  const Image refined = grid.expected_depth_map();
  const Mask refined_valid = grid.usable_mask();
  SynthesizedFlow sf = synthesize_flow(refined, refined_valid, T_kt,
                                       cfg_.camera);

  Image warped(grid.width, grid.height);
  Mask warp_valid(grid.width, grid.height, false);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      if (!refined_valid.at(x, y)) continue;
      WarpResult w =
          warp_pixel(cfg_.camera, Vec2(x, y), refined.at(x, y), T_kt);
      if (!w.in_front || !w.in_bounds) continue;
      SampleResult<double> s = sample_bilinear(image, w.pixel.x(), w.pixel.y());
      if (!s.valid) continue;
      warped.at(x, y) = s.value;
      warp_valid.set(x, y, true);
    }
  }

  keyframe_->grids.flow = fq.forward;
  keyframe_->grids.gamma = gamma;

  AdaptSupervision sup;
  sup.depth_refined = refined;
  sup.depth_valid = refined_valid;
  sup.flow_synth = sf.flow;
  sup.flow_valid = sf.valid;
  sup.warped = warped;
  sup.warp_valid = warp_valid;

  if (cfg_.adapt_enabled && cfg_.adapt_steps > 0) {
    const Image gamma_before = keyframe_->grids.gamma;
    AdaptResult ar = adapt_step(keyframe_->grids, sup, keyframe_->image, image,
                                cfg_.adapt_steps);
    rec.losses = ar.before;
    carry_log_depth_ =
        keyframe_->carry_depth_at_init +
        mean_log_ratio(keyframe_->grids.depth, keyframe_->base_depth,
                       keyframe_->grid.valid);
    carry_log_sigma_ =
        keyframe_->carry_sigma_at_init +
        mean_log_ratio(keyframe_->grids.sigma, keyframe_->base_sigma,
                       keyframe_->grid.valid);
    carry_log_gamma_ += mean_log_ratio(keyframe_->grids.gamma, gamma_before,
                                       keyframe_->grid.valid);
  } else {
    rec.losses = evaluate_losses(keyframe_->grids, sup, keyframe_->image,
                                 image);
  }

  const bool promote = should_create_keyframe(cs, cfg_.thresholds);
  if (promote) {
    make_keyframe(t, timestamp, image, world_t);
    rec.is_keyframe = true;
  }

  trajectory_.entries.push_back({timestamp, world_t});
  last_image_ = image;
  last_timestamp_ = timestamp;
  last_world_ = world_t;
  last_id_ = t;
  records_.push_back(rec);
  return rec;
}

PipelineResult Pipeline::finish() {
  PipelineResult out;
  if (keyframe_) {
    snapshots_.emplace_back(keyframe_->id,
                            keyframe_->grid.expected_depth_map());
  }
  out.trajectory = std::move(trajectory_);
  out.records = std::move(records_);
  out.mutations = std::move(mutations_);
  out.depth_snapshots = std::move(snapshots_);
  out.keyframes = keyframes_;
  out.tracking_lost = tracking_lost_;
  return out;
}

PipelineResult run_sequence(const PipelineConfig& cfg, FrameSource& source,
                            FlowProvider& flow, DepthProvider& depth) {
  if (source.num_frames() < 2) {
    throw EmptySet("sequence needs at least 2 frames, got " +
                   std::to_string(source.num_frames()));
  }
  Pipeline p(cfg, flow, depth);
  for (int i = 0; i < source.num_frames(); ++i) {
    p.process_frame(source.image(i), source.timestamp(i));
  }
  return p.finish();
}

}  // namespace vo
