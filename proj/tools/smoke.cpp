// SPDX-License-Identifier: Apache-2.0
// Temporary integration probe; superseded by the real CLI and tests.
#include <cmath>
#include <cstdio>
#include <cstring>

#include "vo/eval/eval.hpp"
#include "vo/pipeline/pipeline.hpp"
#include "vo/pipeline/providers.hpp"
#include "vo/synth/synth.hpp"

using namespace vo;

int main(int argc, char** argv) {
  ProviderConfig pcfg;
  pcfg.seed = 7;
  PipelineConfig cfg;
  cfg.seed = 7;
  for (int a = 1; a < argc; ++a) {
    if (!std::strcmp(argv[a], "noisy")) {
      pcfg.noise.flow_sigma = 0.5;
      pcfg.noise.depth_bias = 1.5;
      pcfg.noise.depth_log_sigma = 0.2;
      pcfg.noise.depth_log_sigma_global = 0.15;
      cfg.thresholds.delta1 = 2.0;
      cfg.thresholds.delta2 = 1.0;
      cfg.thresholds.keyframe_mean_flow = 15.0;
      cfg.ransac.epipolar_threshold = 2.0;
    } else if (!std::strcmp(argv[a], "ablate")) {
      cfg.filter_enabled = false;
      cfg.adapt_enabled = false;
    } else if (!std::strcmp(argv[a], "nogn")) {
      cfg.gn_enabled = false;
    } else if (!std::strcmp(argv[a], "nofilter")) {
      cfg.filter_enabled = false;
    } else if (!std::strcmp(argv[a], "noadapt")) {
      cfg.adapt_enabled = false;
    } else if (!std::strcmp(argv[a], "transportonly")) {
      cfg.adapt_steps = 0;
    } else if (!std::strcmp(argv[a], "kf15")) {
      cfg.thresholds.keyframe_mean_flow = 15.0;
    } else if (argv[a][0] == 's' && argv[a][1] >= '0' && argv[a][1] <= '9') {
      pcfg.seed = static_cast<std::uint64_t>(std::atoi(argv[a] + 1));
    }
  }

  SceneSpec scene = make_corridor(11, 60);
  cfg.camera = scene.K;
  SyntheticSource src(scene, pcfg);
  SyntheticFlowProvider flow(scene, pcfg);
  SyntheticDepthProvider depth(scene, pcfg);

  Pipeline p(cfg, flow, depth);
  Se3 est_kf_world;
  for (int i = 0; i < scene.num_frames; ++i) {
    FrameRecord r = p.process_frame(src.image(i), src.timestamp(i));
    const Se3 Twc = pose_at(scene, i);
    const Se3 Tw0 = pose_at(scene, r.keyframe_id);
    const double true_baseline =
        (Twc.translation() - Tw0.translation()).norm();
    if (r.is_keyframe) est_kf_world = r.world;
    const double est_baseline =
        (r.world.translation() - est_kf_world.translation()).norm();
    // grid inverse-depth RMSE against the exact keyframe render
    const RenderOut ro = render(scene, p.keyframe()->id);
    const DepthFilterGrid& g = p.keyframe()->grid;
    double se = 0;
    int n = 0, conv = 0;
    std::vector<double> dg;
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) {
        if (!g.usable(x, y) || !ro.depth_valid.at(x, y)) continue;
        const double err = g.at(x, y).mu - 1.0 / ro.depth.at(x, y);
        se += err * err;
        ++n;
        conv += g.at(x, y).converged ? 1 : 0;
        if (g.at(x, y).mu > 0)
          dg.push_back(g.at(x, y).expected_depth() / ro.depth.at(x, y));
      }
    double grid_gauge = -1.0;
    if (!dg.empty()) {
      auto mid = dg.begin() + static_cast<std::ptrdiff_t>(dg.size() / 2);
      std::nth_element(dg.begin(), mid, dg.end());
      grid_gauge = *mid;
    }
    const bool verbose = argc > 1 && !std::strcmp(argv[argc - 1], "v");
    if (i % 3 == 0 || verbose || !r.note.empty()) {
      std::printf(
          "f%02d kf=%d %-9s scale=%.4f true_bl=%.4f gauge=%.3f grid=%.3f "
          "corr=%4d izRMSE=%.3e conv=%d/%d %s\n",
          r.frame, r.keyframe_id, r.solver.c_str(), r.scale, true_baseline,
          true_baseline > 1e-9 ? est_baseline / true_baseline : -1.0,
          grid_gauge, r.correspondences, n ? std::sqrt(se / n) : -1.0, conv,
          n, r.note.c_str());
    }
  }

  PipelineResult res = p.finish();
  Trajectory truth;
  for (int i = 0; i < scene.num_frames; ++i) {
    truth.entries.push_back({i / pcfg.fps, pose_at(scene, i)});
  }
  std::printf("frames=%zu keyframes=%d lost=%d\n", res.trajectory.size(),
              res.keyframes, res.tracking_lost);
  try {
    MetricReport rep = evaluate(res.trajectory, truth, 1.0);
    std::printf("scale=%.6f ate=%.6g rpe=%.6g scale_drift=%.6g\n", rep.scale,
                rep.ate_rmse, rep.rpe_trans,
                scale_drift(res.trajectory, truth));
  } catch (const std::exception& e) {
    std::printf("eval failed: %s\n", e.what());
  }
  return 0;
}
