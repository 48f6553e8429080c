// SPDX-License-Identifier: Apache-2.0
// Temporary probe: small-baseline scale bias decomposition.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "vo/core/geometry.hpp"
#include "vo/flow/flow.hpp"
#include "vo/pose/pose.hpp"
#include "vo/synth/synth.hpp"
#include "vo/tri/triangulation.hpp"

using namespace vo;

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return -1.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

int main() {
  SceneSpec scene = make_corridor(11, 60);
  const CameraIntrinsics& K = scene.K;
  NoiseSpec noise;
  noise.flow_sigma = 0.5;

  std::printf("%3s %8s | %10s %10s | %8s %8s %8s\n", "k", "bl", "truepose",
              "estpose", "rot_deg", "dir_deg", "ninl");
  for (int k = 1; k <= 8; ++k) {
    const Se3 T0 = pose_at(scene, 0);
    const Se3 Tk = pose_at(scene, k);
    const Se3 T_kt = Tk.inverse() * T0;  // frame0 cam -> framek cam
    const double bl = (Tk.translation() - T0.translation()).norm();
    const RenderOut r0 = render(scene, 0);

    double g_true = 0, g_est = 0, rot = 0, dir = 0;
    int ninl = 0;
    const int trials = 10;
    for (int tr = 0; tr < trials; ++tr) {
      FlowPair fp = ground_truth_flow(scene, 0, k);
      Rng rng(1234 + 1000 * static_cast<std::uint64_t>(k) +
              static_cast<std::uint64_t>(tr));
      FlowField fwd = corrupt_flow(fp.forward, noise, rng);
      FlowField bwd = corrupt_flow(fp.backward, noise, rng);

      RobustnessThresholds th;
      th.delta1 = 2.0;
      th.delta2 = 1.0;
      CorrespondenceSet cs = select_robust(fwd, bwd, th);

      // triangulation at the TRUE pose (unit-normalized translation)
      Se3 T_unit(T_kt.rotation(), T_kt.translation() / bl);
      std::vector<double> ratio_true;
      for (const auto& c : cs.pairs) {
        if (!fp.valid_forward.at(static_cast<int>(c.p_k.x()),
                                 static_cast<int>(c.p_k.y())))
          continue;
        try {
          TriangulationResult t =
              midpoint_triangulate(c.p_k, c.p_t, T_unit, K);
          const double d_true = r0.depth.at(static_cast<int>(c.p_k.x()),
                                            static_cast<int>(c.p_k.y()));
          if (d_true > 0) ratio_true.push_back(d_true / (t.depth * bl));
        } catch (const ParallelRays&) {
        } catch (const NegativeDepth&) {
        }
      }
      g_true += median(ratio_true);

      // full estimated chain
      RansacConfig rc;
      rc.epipolar_threshold = 2.0;
      rc.rng_seed = 99 + static_cast<std::uint64_t>(tr);
      try {
        EssentialEstimate ee = estimate_essential(cs, K, rc);
        std::vector<double> ratio_est;
        for (std::size_t i = 0; i < cs.size(); ++i) {
          if (!ee.inlier_mask[i]) continue;
          const auto& c = cs.pairs[i];
          try {
            TriangulationResult t =
                midpoint_triangulate(c.p_k, c.p_t, ee.pose, K);
            const double d_true = r0.depth.at(static_cast<int>(c.p_k.x()),
                                              static_cast<int>(c.p_k.y()));
            if (d_true > 0) ratio_est.push_back(d_true / (t.depth * bl));
          } catch (const ParallelRays&) {
          } catch (const NegativeDepth&) {
          }
        }
        g_est += median(ratio_est);
        ninl += ee.num_inliers;
        const Se3 err(ee.pose.rotation() * T_kt.rotation().transpose(),
                      Vec3::Zero());
        rot += err.rotation_angle() * 180.0 / M_PI;
        const Vec3 t_est = ee.pose.translation().normalized();
        const Vec3 t_gt = T_kt.translation().normalized();
        dir += std::acos(std::clamp(t_est.dot(t_gt), -1.0, 1.0)) * 180.0 /
               M_PI;
      } catch (const std::exception& e) {
        std::printf("k=%d trial=%d: %s\n", k, tr, e.what());
      }
    }
    std::printf("%3d %8.3f | %10.4f %10.4f | %8.3f %8.3f %8d\n", k, bl,
                g_true / trials, g_est / trials, rot / trials, dir / trials,
                ninl / trials);
  }
  return 0;
}
