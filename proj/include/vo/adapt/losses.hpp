// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "vo/core/camera.hpp"
#include "vo/core/image.hpp"
#include "vo/core/se3.hpp"
#include "vo/flow/flow.hpp"

namespace vo {

// Edge-aware total variation: forward differences of G weighted by
// exp(-|forward difference of I|), each direction normalized by its own
// term count. Returns the value; accumulates the subgradient into *dG when
// given (dG must already be sized and zeroed by the caller or default).
double smoothness_loss(const Image& G, const Image& I, Image* dG = nullptr);
double smoothness_loss(const FlowField& G, const Image& I,
                       FlowField* dG = nullptr);

struct DepthNllResult {
  double value = 0;
  Image d_prior;   // gradient w.r.t. the prior depth map
  Image d_sigma;   // gradient w.r.t. the uncertainty map
  int count = 0;   // valid data-term pixels
};

// Laplacian NLL of inverse-depth residuals |1/refined - 1/prior| / sigma
// + log sigma, averaged over valid pixels, plus edge-aware smoothness of
// the prior map.
DepthNllResult depth_nll_loss(const Image& refined, const Image& prior,
                              const Image& sigma, const Image& I_k,
                              const Mask& valid);

struct FlowLossResult {
  double value = 0;
  FlowField d_pred;  // gradient w.r.t. the predicted flow
  int count = 0;
};

// Per-pixel L1 between predicted and synthesized flow (component sum),
// averaged over valid pixels, plus edge-aware smoothness of the prediction.
FlowLossResult flow_loss(const FlowField& pred, const FlowField& synth,
                         const Image& I_k, const Mask& valid);

struct PhotoNllResult {
  double value = 0;
  Image d_warped;  // gradient w.r.t. the warped intensities
  Image d_gamma;   // gradient w.r.t. the uncertainty map
  int count = 0;
};

// Laplacian NLL of intensity residuals |warped - I_t| / gamma + log gamma,
// averaged over valid warp pixels.
PhotoNllResult photometric_nll(const Image& I_t, const Image& warped,
                               const Image& gamma, const Mask& valid);

struct SynthesizedFlow {
  FlowField flow;
  Mask valid;
};

// Flow field induced by a depth map and a relative pose: warped position
// minus pixel position; marked invalid where the warp leaves the image or
// depth is unusable.
SynthesizedFlow synthesize_flow(const Image& depth, const Mask& depth_valid,
                                const Se3& T, const CameraIntrinsics& K);

struct LossBreakdown {
  double photometric = 0;
  double depth = 0;
  double flow = 0;
  double smoothness = 0;  // informational: summed smoothness contributions
  double total = 0;       // photometric + depth + flow, exactly
  int photometric_count = 0;
  int depth_count = 0;
  int flow_count = 0;
};

std::string to_json_line(const LossBreakdown& l);

// Stand-in for per-frame network predictions: directly optimizable grids
// with per-grid learning rates. Positive grids step in log space.
struct AdaptableGrids {
  Image depth;      // prior depth, meters
  Image sigma;      // inverse-depth uncertainty
  FlowField flow;   // forward flow prediction, px
  Image gamma;      // photometric uncertainty
  double lr_depth = 1e-2;
  double lr_flow = 1e-1;
  double lr_uncertainty = 1e-2;
  double gamma_floor = 1e-3;
};

// This time step's refined quantities, used as fixed self-supervision.
struct AdaptSupervision {
  Image depth_refined;
  Mask depth_valid;
  FlowField flow_synth;
  Mask flow_valid;
  Image warped;  // keyframe image warped into the target frame
  Mask warp_valid;
};

struct AdaptResult {
  LossBreakdown before;
  LossBreakdown after;
};

LossBreakdown evaluate_losses(const AdaptableGrids& grids,
                              const AdaptSupervision& sup, const Image& I_k,
                              const Image& I_t);

// Gradient-descent steps on all grids against the total loss. Losses are
// re-evaluated between steps; returns the loss before the first and after
// the last step.
AdaptResult adapt_step(AdaptableGrids& grids, const AdaptSupervision& sup,
                       const Image& I_k, const Image& I_t, int steps = 2);

}  // namespace vo
