// SPDX-License-Identifier: Apache-2.0
#include "vo/adapt/losses.hpp"

#include <cmath>

#include <json.hpp>

#include "vo/core/errors.hpp"
#include "vo/core/geometry.hpp"

namespace vo {

namespace {

inline double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// One scalar channel of the edge-aware loss; accumulates into *dG.
double smoothness_channel(const double* G, const Image& I, double* dG) {
  const int w = I.width(), h = I.height();
  const auto at = [w](const double* p, int x, int y) {
    return p[static_cast<size_t>(y) * w + x];
  };
  double vx = 0, vy = 0;
  const double nx = static_cast<double>(w - 1) * h;
  const double ny = static_cast<double>(h - 1) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + 1 < w; ++x) {
      const double dg = at(G, x + 1, y) - at(G, x, y);
      const double wgt = std::exp(-std::abs(I.at(x + 1, y) - I.at(x, y)));
      vx += std::abs(dg) * wgt;
      if (dG) {
        const double g = sgn(dg) * wgt / nx;
        dG[static_cast<size_t>(y) * w + x + 1] += g;
        dG[static_cast<size_t>(y) * w + x] -= g;
      }
    }
  for (int y = 0; y + 1 < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dg = at(G, x, y + 1) - at(G, x, y);
      const double wgt = std::exp(-std::abs(I.at(x, y + 1) - I.at(x, y)));
      vy += std::abs(dg) * wgt;
      if (dG) {
        const double g = sgn(dg) * wgt / ny;
        dG[static_cast<size_t>(y + 1) * w + x] += g;
        dG[static_cast<size_t>(y) * w + x] -= g;
      }
    }
  return vx / nx + vy / ny;
}

}  // namespace

double smoothness_loss(const Image& G, const Image& I, Image* dG) {
  if (!G.same_size(I)) throw DimensionMismatch("grid and image sizes differ");
  if (dG && !dG->same_size(I)) *dG = Image(I.width(), I.height(), 0.0);
  return smoothness_channel(G.data(), I, dG ? dG->data() : nullptr);
}

double smoothness_loss(const FlowField& G, const Image& I, FlowField* dG) {
  if (G.width != I.width() || G.height != I.height())
    throw DimensionMismatch("grid and image sizes differ");
  if (dG && (dG->width != G.width || dG->height != G.height))
    *dG = FlowField(G.width, G.height);
  return smoothness_channel(G.dx.data(), I, dG ? dG->dx.data() : nullptr) +
         smoothness_channel(G.dy.data(), I, dG ? dG->dy.data() : nullptr);
}

DepthNllResult depth_nll_loss(const Image& refined, const Image& prior,
                              const Image& sigma, const Image& I_k,
                              const Mask& valid) {
  if (!refined.same_size(prior) || !refined.same_size(sigma) ||
      !refined.same_size(I_k))
    throw DimensionMismatch("depth loss input sizes differ");
  const int w = I_k.width(), h = I_k.height();

  DepthNllResult out;
  out.d_prior = Image(w, h, 0.0);
  out.d_sigma = Image(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!valid.at(x, y)) continue;
      if (!(refined.at(x, y) > 0) || !(prior.at(x, y) > 0) ||
          !(sigma.at(x, y) > 0))
        throw NonPositiveInput("depth or uncertainty not positive");
      ++out.count;
    }

  double data = 0;
  if (out.count > 0) {
    const double inv_n = 1.0 / out.count;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!valid.at(x, y)) continue;
        const double dp = prior.at(x, y);
        const double s = sigma.at(x, y);
        const double r = 1.0 / refined.at(x, y) - 1.0 / dp;
        data += (std::abs(r) / s + std::log(s)) * inv_n;
        out.d_prior.at(x, y) += sgn(r) / (dp * dp) / s * inv_n;
        out.d_sigma.at(x, y) +=
            (-std::abs(r) / (s * s) + 1.0 / s) * inv_n;
      }
  }
  out.value = data + smoothness_loss(prior, I_k, &out.d_prior);
  return out;
}

FlowLossResult flow_loss(const FlowField& pred, const FlowField& synth,
                         const Image& I_k, const Mask& valid) {
  if (!pred.same_size(synth) || pred.width != I_k.width() ||
      pred.height != I_k.height())
    throw DimensionMismatch("flow loss input sizes differ");
  FlowLossResult out;
  out.d_pred = FlowField(pred.width, pred.height);
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x)
      if (valid.at(x, y)) ++out.count;

  double data = 0;
  if (out.count > 0) {
    const double inv_n = 1.0 / out.count;
    for (int y = 0; y < pred.height; ++y)
      for (int x = 0; x < pred.width; ++x) {
        if (!valid.at(x, y)) continue;
        const size_t k = pred.idx(x, y);
        const double ex = pred.dx[k] - synth.dx[k];
        const double ey = pred.dy[k] - synth.dy[k];
        data += (std::abs(ex) + std::abs(ey)) * inv_n;
        out.d_pred.dx[k] += sgn(ex) * inv_n;
        out.d_pred.dy[k] += sgn(ey) * inv_n;
      }
  }
  out.value = data + smoothness_loss(pred, I_k, &out.d_pred);
  return out;
}

PhotoNllResult photometric_nll(const Image& I_t, const Image& warped,
                               const Image& gamma, const Mask& valid) {
  if (!I_t.same_size(warped) || !I_t.same_size(gamma))
    throw DimensionMismatch("photometric loss input sizes differ");
  PhotoNllResult out;
  out.d_warped = Image(I_t.width(), I_t.height(), 0.0);
  out.d_gamma = Image(I_t.width(), I_t.height(), 0.0);
  for (int y = 0; y < I_t.height(); ++y)
    for (int x = 0; x < I_t.width(); ++x)
      if (valid.at(x, y)) ++out.count;
  if (out.count == 0) return out;

  const double inv_n = 1.0 / out.count;
  for (int y = 0; y < I_t.height(); ++y)
    for (int x = 0; x < I_t.width(); ++x) {
      if (!valid.at(x, y)) continue;
      const double g = gamma.at(x, y);
      const double r = warped.at(x, y) - I_t.at(x, y);
      out.value += (std::abs(r) / g + std::log(g)) * inv_n;
      out.d_warped.at(x, y) = sgn(r) / g * inv_n;
      out.d_gamma.at(x, y) = (-std::abs(r) / (g * g) + 1.0 / g) * inv_n;
    }
  return out;
}

SynthesizedFlow synthesize_flow(const Image& depth, const Mask& depth_valid,
                                const Se3& T, const CameraIntrinsics& K) {
  SynthesizedFlow out;
  out.flow = FlowField(depth.width(), depth.height());
  out.valid = Mask(depth.width(), depth.height(), false);
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth.at(x, y);
      if (!depth_valid.at(x, y) || !(d > 0)) continue;
      const Vec2 p(x, y);
      const WarpResult wr = warp_pixel(K, p, d, T);
      if (!wr.in_front || !wr.in_bounds) continue;
      out.flow.set(x, y, wr.pixel - p);
      out.valid.set(x, y, true);
    }
  return out;
}

std::string to_json_line(const LossBreakdown& l) {
  nlohmann::json j;
  j["photometric"] = l.photometric;
  j["depth"] = l.depth;
  j["flow"] = l.flow;
  j["smoothness"] = l.smoothness;
  j["total"] = l.total;
  j["photometric_count"] = l.photometric_count;
  j["depth_count"] = l.depth_count;
  j["flow_count"] = l.flow_count;
  return j.dump();
}

namespace {

struct LossEval {
  LossBreakdown losses;
  DepthNllResult d;
  FlowLossResult f;
  PhotoNllResult p;
};

LossEval eval_all(const AdaptableGrids& grids, const AdaptSupervision& sup,
                  const Image& I_k, const Image& I_t) {
  LossEval e;
  e.p = photometric_nll(I_t, sup.warped, grids.gamma, sup.warp_valid);
  e.d = depth_nll_loss(sup.depth_refined, grids.depth, grids.sigma, I_k,
                       sup.depth_valid);
  e.f = flow_loss(grids.flow, sup.flow_synth, I_k, sup.flow_valid);
  e.losses.photometric = e.p.value;
  e.losses.depth = e.d.value;
  e.losses.flow = e.f.value;
  e.losses.smoothness = smoothness_loss(grids.depth, I_k) +
                        smoothness_loss(grids.flow, I_k);
  e.losses.total = e.losses.photometric + e.losses.depth + e.losses.flow;
  e.losses.photometric_count = e.p.count;
  e.losses.depth_count = e.d.count;
  e.losses.flow_count = e.f.count;
  return e;
}

}  // namespace

LossBreakdown evaluate_losses(const AdaptableGrids& grids,
                              const AdaptSupervision& sup, const Image& I_k,
                              const Image& I_t) {
  return eval_all(grids, sup, I_k, I_t).losses;
}

AdaptResult adapt_step(AdaptableGrids& grids, const AdaptSupervision& sup,
                       const Image& I_k, const Image& I_t, int steps) {
  AdaptResult out;
  LossEval e = eval_all(grids, sup, I_k, I_t);
  out.before = e.losses;
  for (int step = 0; step < steps; ++step) {
    if (step > 0) e = eval_all(grids, sup, I_k, I_t);
    const int w = I_k.width(), h = I_k.height();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        // positive grids step in log space: theta *= exp(-lr theta dL/dtheta)
        double& dv = grids.depth.at(x, y);
        dv *= std::exp(-grids.lr_depth * dv * e.d.d_prior.at(x, y));
        double& sv = grids.sigma.at(x, y);
        sv *= std::exp(-grids.lr_uncertainty * sv * e.d.d_sigma.at(x, y));
        double& gv = grids.gamma.at(x, y);
        gv *= std::exp(-grids.lr_uncertainty * gv * e.p.d_gamma.at(x, y));
        if (gv < grids.gamma_floor) gv = grids.gamma_floor;
        const size_t k = grids.flow.idx(x, y);
        grids.flow.dx[k] -= grids.lr_flow * e.f.d_pred.dx[k];
        grids.flow.dy[k] -= grids.lr_flow * e.f.d_pred.dy[k];
      }
  }
  out.after = eval_all(grids, sup, I_k, I_t).losses;
  return out;
}

}  // namespace vo
