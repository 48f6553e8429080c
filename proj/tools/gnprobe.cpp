// SPDX-License-Identifier: Apache-2.0
// Temporary probe: photometric residuals and one GN call at the exact state.
#include <cmath>
#include <cstdio>
#include <vector>

#include "vo/core/geometry.hpp"
#include "vo/filter/depth_filter.hpp"
#include "vo/gn/photometric.hpp"
#include "vo/synth/synth.hpp"

using namespace vo;

int main(int argc, char** argv) {
  const int target = argc > 1 ? std::atoi(argv[1]) : 1;
  SceneSpec scene = make_corridor(11, 60);
  const RenderOut r0 = render(scene, 0);
  const RenderOut rt = render(scene, target);
  const Se3 T_kt = rt.T_wc.inverse() * r0.T_wc;  // keyframe -> target

  const CameraIntrinsics& K = scene.K;
  double se = 0, amax = 0, mean = 0;
  int n = 0;
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      if (!r0.depth_valid.at(x, y)) continue;
      const double d = r0.depth.at(x, y);
      const WarpResult w = warp_pixel(K, Vec2(x, y), d, T_kt);
      if (!w.in_front || !w.in_bounds) continue;
      const auto s = sample_bilinear(rt.intensity, w.pixel.x(), w.pixel.y());
      if (!s.valid) continue;
      const double r = r0.intensity.at(x, y) - s.value;
      se += r * r;
      mean += r;
      amax = std::max(amax, std::abs(r));
      ++n;
    }
  }
  std::printf("exact-warp residuals: n=%d rms=%.3e mean=%+.3e max=%.3e\n", n,
              std::sqrt(se / n), mean / n, amax);

  // One GN call starting from the exact depth and exact pose.
  Image sigma(K.width, K.height, 0.05);
  DepthFilterGrid grid =
      init_from_prior(r0.depth, sigma, &r0.depth_valid);
  Image gamma(K.width, K.height, 0.1);
  GnConfig cfg;
  FrameObservation obs{rt.intensity, gamma, T_kt};
  for (int iters : {1, 3}) {
    cfg.iterations = iters;
    DepthFilterGrid g = grid;
    OptimizeResult res =
        optimize(r0.intensity, {obs}, g, K, cfg);
    double dse = 0, dmax = 0;
    for (size_t i = 0; i < res.pixels.size(); ++i) {
      const auto [x, y] = res.pixels[i];
      const double rel =
          res.depth[i] / r0.depth.at(x, y) - 1.0;
      dse += rel * rel;
      dmax = std::max(dmax, std::abs(rel));
    }
    const Se3 err = res.pose * T_kt.inverse();
    std::printf(
        "gn iters=%d: pixels=%zu cost %0.3e->%0.3e accepted=%d "
        "depth relRMSE=%.3e relMAX=%.3e pose err rot=%.3e trans=%.3e\n",
        iters, res.pixels.size(), res.initial_cost, res.final_cost,
        res.accepted_steps, std::sqrt(dse / res.pixels.size()), dmax,
        err.rotation_angle(), err.translation().norm());
  }
  return 0;
}
