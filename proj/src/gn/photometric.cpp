// SPDX-License-Identifier: Apache-2.0
#include "vo/gn/photometric.hpp"

#include <cmath>
#include <limits>

#include "vo/core/dual.hpp"
#include "vo/core/errors.hpp"
#include "vo/core/geometry.hpp"

namespace vo {

namespace {

// Central differences, zero on the one-pixel border.
void central_diff(const Image& img, Image* gx, Image* gy) {
  const int w = img.width(), h = img.height();
  *gx = Image(w, h, 0.0);
  *gy = Image(w, h, 0.0);
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      gx->at(x, y) = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      gy->at(x, y) = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
    }
}

template <typename T>
struct PoseT {
  Mat3T<T> R = Mat3T<T>::Identity();
  Vec3T<T> t = Vec3T<T>::Zero();
};

template <typename T>
Mat3T<T> hat3(const Vec3T<T>& w) {
  Mat3T<T> m;
  m << T(0), -w.z(), w.y(), w.z(), T(0), -w.x(), -w.y(), w.x(), T(0);
  return m;
}

// exp of [rho, phi] with the small-angle branch picked at the primal value.
template <typename T>
PoseT<T> exp_pose(const Vec6T<T>& xi) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Vec3T<T> rho = xi.template head<3>();
  const Vec3T<T> phi = xi.template tail<3>();
  const T theta2 = phi.dot(phi);
  const Mat3T<T> W = hat3(phi);
  const Mat3T<T> W2 = W * W;
  PoseT<T> out;
  Mat3T<T> V;
  if (value_of(theta2) < 1e-20) {
    out.R = Mat3T<T>::Identity() + W + 0.5 * W2;
    V = Mat3T<T>::Identity() + 0.5 * W + (1.0 / 6.0) * W2;
  } else {
    const T theta = sqrt(theta2);
    const T A = sin(theta) / theta;
    const T B = (1.0 - cos(theta)) / theta2;
    const T C = (1.0 - A) / theta2;
    out.R = Mat3T<T>::Identity() + A * W + B * W2;
    V = Mat3T<T>::Identity() + B * W + C * W2;
  }
  out.t = V * rho;
  return out;
}

template <typename T>
PoseT<T> compose(const PoseT<T>& a, const PoseT<T>& b) {
  return {a.R * b.R, a.R * b.t + a.t};
}

// 6x6 Cholesky solve; the pivot test reads primal values so the factor
// structure is identical for dual numbers. Returns false when not SPD.
template <typename T>
bool solve_spd6(const Mat6T<T>& A, const Vec6T<T>& b, Vec6T<T>* x) {
  using std::sqrt;
  Mat6T<T> L = Mat6T<T>::Zero();
  for (int k = 0; k < 6; ++k) {
    T pivot = A(k, k);
    for (int j = 0; j < k; ++j) pivot -= L(k, j) * L(k, j);
    if (!(value_of(pivot) > 0) || !std::isfinite(value_of(pivot)))
      return false;
    L(k, k) = sqrt(pivot);
    for (int i = k + 1; i < 6; ++i) {
      T s = A(i, k);
      for (int j = 0; j < k; ++j) s -= L(i, j) * L(k, j);
      L(i, k) = s / L(k, k);
    }
  }
  Vec6T<T> y;
  for (int i = 0; i < 6; ++i) {
    T s = b(i);
    for (int j = 0; j < i; ++j) s -= L(i, j) * y(j);
    y(i) = s / L(i, i);
  }
  for (int i = 5; i >= 0; --i) {
    T s = y(i);
    for (int j = i + 1; j < 6; ++j) s -= L(j, i) * (*x)(j);
    (*x)(i) = s / L(i, i);
  }
  return true;
}

template <typename T>
struct FrameView {
  const Image* image = nullptr;
  const Image* gamma = nullptr;
  const MatX* dgamma = nullptr;  // tangent of gamma; dual runs only
  Image gx, gy;                  // central differences of image
  PoseT<T> pose;                 // keyframe -> frame
  bool opt_pose = false;
};

inline double fetch_gamma(const FrameView<double>& f, int x, int y) {
  return f.gamma->at(x, y);
}
inline Dual fetch_gamma(const FrameView<Dual>& f, int x, int y) {
  return Dual(f.gamma->at(x, y), f.dgamma ? (*f.dgamma)(y, x) : 0.0);
}

template <typename T>
struct RowsT {
  std::vector<T> r, jd;
  std::vector<Vec6T<T>> jt;
  std::vector<int> pix;
  std::vector<std::uint8_t> has_pose;

  T cost() const {
    T s(0.0);
    for (const auto& v : r) s += v * v;
    return s / static_cast<double>(r.size());
  }
};

template <typename T>
RowsT<T> assemble(const Image& I_k, const std::vector<FrameView<T>>& frames,
                  const std::vector<std::pair<int, int>>& pixels,
                  const std::vector<Vec3>& rays, const std::vector<T>& depth,
                  const CameraIntrinsics& K, const GnConfig& cfg,
                  bool with_jacobians) {
  RowsT<T> rows;
  const size_t guess = pixels.size() * frames.size();
  rows.r.reserve(guess);
  rows.jd.reserve(with_jacobians ? guess : 0);

  for (const auto& f : frames) {
    for (size_t ap = 0; ap < pixels.size(); ++ap) {
      const auto [x, y] = pixels[ap];
      T d = depth[ap];
      if (!(value_of(d) > cfg.depth_floor)) d = T(cfg.depth_floor);
      const Vec3T<T> dir = rays[ap].template cast<T>();
      const Vec3T<T> X = f.pose.R * (d * dir) + f.pose.t;
      if (!(value_of(X.z()) > 1e-12)) continue;
      const T iz = T(1.0) / X.z();
      const T px = K.fx * X.x() * iz + K.cx;
      const T py = K.fy * X.y() * iz + K.cy;
      const auto samp = sample_bilinear_t(*f.image, px, py);
      if (!samp.valid) continue;
      const T g = fetch_gamma(f, x, y);
      const T r = (I_k.at(x, y) - samp.value) / g;
      rows.r.push_back(r);
      rows.pix.push_back(static_cast<int>(ap));
      rows.has_pose.push_back(f.opt_pose ? 1 : 0);
      if (!with_jacobians) continue;

      const T gxv = sample_bilinear_t(f.gx, px, py).value;
      const T gyv = sample_bilinear_t(f.gy, px, py).value;
      // dI/dX = [gx gy] * dpi/dX
      const T fxiz = K.fx * iz, fyiz = K.fy * iz;
      const Vec3T<T> dIdX(gxv * fxiz, gyv * fyiz,
                          -(gxv * fxiz * X.x() + gyv * fyiz * X.y()) * iz);
      const Vec3T<T> dXdd = f.pose.R * dir;
      const T inv_g = T(1.0) / g;
      rows.jd.push_back(-inv_g * dIdX.dot(dXdd));
      Vec6T<T> jt = Vec6T<T>::Zero();
      if (f.opt_pose) {
        const Vec3T<T> trans = -inv_g * dIdX;
        const Vec3T<T> rot = -inv_g * X.cross(dIdX);
        jt.template head<3>() = trans;
        jt.template tail<3>() = rot;
      }
      rows.jt.push_back(jt);
    }
  }
  return rows;
}

template <typename T>
struct StepT {
  std::vector<T> d_depth;
  Vec6T<T> d_pose = Vec6T<T>::Zero();
};

// Damped normal equations: depth block is diagonal, so the pose system is
// the Schur complement followed by per-pixel back-substitution. Pixels whose
// damped curvature underflows keep their depth.
template <typename T>
bool step_from_rows(const RowsT<T>& rows, size_t npix, double lambda,
                    StepT<T>* out, bool with_depth = true) {
  std::vector<T> D(npix, T(0.0)), gd(npix, T(0.0));
  std::vector<Vec6T<T>> B(npix, Vec6T<T>::Zero());
  Mat6T<T> C = Mat6T<T>::Zero();
  Vec6T<T> gT = Vec6T<T>::Zero();

  for (size_t j = 0; j < rows.r.size(); ++j) {
    const int p = rows.pix[j];
    const T& jd = rows.jd[j];
    D[p] += jd * jd;
    gd[p] += jd * rows.r[j];
    if (rows.has_pose[j]) {
      const Vec6T<T>& jt = rows.jt[j];
      C += jt * jt.transpose();
      gT += jt * rows.r[j];
      B[p] += jd * jt;
    }
  }

  Mat6T<T> S = C;
  // Null pose directions (e.g. joint depth+translation rescaling) carry no
  // diagonal curvature, so multiplicative damping leaves them free to absorb
  // sampling noise; a trace-relative floor pins them to a zero step.
  T pose_floor(0.0);
  if (lambda > 0) {
    for (int i = 0; i < 6; ++i) pose_floor += C(i, i);
    pose_floor = pose_floor * ((1.0 / 6.0) * 1e-2);
  }
  for (int i = 0; i < 6; ++i) S(i, i) += lambda * C(i, i) + pose_floor;
  Vec6T<T> rhs = -gT;
  std::vector<T> Dt(npix);
  if (with_depth) {
    for (size_t p = 0; p < npix; ++p) {
      Dt[p] = D[p] * (1.0 + lambda);
      if (!(value_of(Dt[p]) > 1e-300)) continue;
      const T inv = T(1.0) / Dt[p];
      S -= (B[p] * B[p].transpose()) * inv;
      rhs += B[p] * (gd[p] * inv);
    }
  }

  Vec6T<T> dT = Vec6T<T>::Zero();
  if (!solve_spd6(S, rhs, &dT)) return false;

  out->d_pose = dT;
  out->d_depth.assign(npix, T(0.0));
  if (with_depth) {
    for (size_t p = 0; p < npix; ++p) {
      if (!(value_of(Dt[p]) > 1e-300)) continue;
      out->d_depth[p] = -(gd[p] + B[p].dot(dT)) / Dt[p];
    }
  }
  return true;
}

template <typename T>
struct OptOutT {
  std::vector<T> depth;
  PoseT<T> pose;
  T cost0{}, cost{};
  int accepted = 0;
};

template <typename T>
OptOutT<T> optimize_t(const Image& I_k, std::vector<FrameView<T>>& frames,
                      const std::vector<std::pair<int, int>>& pixels,
                      const std::vector<Vec3>& rays, std::vector<T> depth,
                      const CameraIntrinsics& K, const GnConfig& cfg) {
  const size_t last = frames.size() - 1;
  const size_t npix = pixels.size();
  double lambda = cfg.damped ? cfg.lambda0 : 0.0;

  OptOutT<T> out;
  {
    const RowsT<T> r0 =
        assemble(I_k, frames, pixels, rays, depth, K, cfg, false);
    if (r0.r.empty())
      throw EmptySystem("no valid photometric residual at initialization");
    out.cost0 = r0.cost();
  }
  T cost = out.cost0;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const RowsT<T> rows =
        assemble(I_k, frames, pixels, rays, depth, K, cfg, true);
    if (rows.r.empty()) break;

    bool accepted = false;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      StepT<T> step;
      const bool solved =
          step_from_rows(rows, npix, lambda, &step, cfg.optimize_depth);
      if (solved) {
        std::vector<T> cand_depth = depth;
        for (size_t p = 0; p < npix; ++p) {
          T dd = step.d_depth[p];
          if (cfg.damped) {
            // Per-pixel trust region: a depth-insensitive pixel solves to
            // an arbitrarily large step from pure noise; a step past half
            // the depth is outside linearization validity, so drop it.
            const double lim = 0.5 * std::abs(value_of(depth[p]));
            if (std::abs(value_of(dd)) > lim) dd = T(0.0);
          }
          cand_depth[p] += dd;
        }
        const PoseT<T> cand_pose =
            compose(exp_pose(step.d_pose), frames[last].pose);
        const PoseT<T> saved = frames[last].pose;
        frames[last].pose = cand_pose;
        const RowsT<T> cand =
            assemble(I_k, frames, pixels, rays, cand_depth, K, cfg, false);
        const bool usable = !cand.r.empty();
        const T cand_cost = usable ? cand.cost() : T(0.0);
        if (usable &&
            (!cfg.damped || value_of(cand_cost) <= value_of(cost))) {
          depth = std::move(cand_depth);
          cost = cand_cost;
          ++out.accepted;
          lambda *= 0.5;
          accepted = true;
          break;
        }
        frames[last].pose = saved;
      }
      lambda *= 10.0;
      if (lambda > cfg.lambda_max)
        throw SingularSystem(
            "photometric system not solvable at maximum damping");
    }
    if (!accepted) break;
  }

  out.depth = std::move(depth);
  out.pose = frames[last].pose;
  out.cost = cost;
  return out;
}

template <typename T>
std::vector<FrameView<T>> make_views(const Image& I_k,
                                     const std::vector<FrameObservation>& fr,
                                     const DepthFilterGrid& depth,
                                     const GnConfig& cfg) {
  if (fr.empty()) throw EmptySystem("no source frames given");
  std::vector<FrameView<T>> views(fr.size());
  for (size_t i = 0; i < fr.size(); ++i) {
    if (!fr[i].image.same_size(I_k) || !fr[i].gamma.same_size(I_k))
      throw DimensionMismatch("frame image or gamma size differs");
    views[i].image = &fr[i].image;
    views[i].gamma = &fr[i].gamma;
    central_diff(fr[i].image, &views[i].gx, &views[i].gy);
    views[i].pose.R = fr[i].T.rotation().cast<T>();
    views[i].pose.t = fr[i].T.translation().cast<T>();
    views[i].opt_pose = (i + 1 == fr.size());
  }
  if (depth.width != I_k.width() || depth.height != I_k.height())
    throw DimensionMismatch("depth grid size differs from keyframe");
  for (const auto& f : fr)
    for (int y = 0; y < I_k.height(); ++y)
      for (int x = 0; x < I_k.width(); ++x)
        if (!(f.gamma.at(x, y) >= cfg.gamma_floor))
          throw NonPositiveInput("gamma below its floor");
  return views;
}

std::vector<Vec3> pixel_rays(const std::vector<std::pair<int, int>>& pixels,
                             const CameraIntrinsics& K) {
  std::vector<Vec3> rays;
  rays.reserve(pixels.size());
  for (const auto& [x, y] : pixels) rays.push_back(K.ray(Vec2(x, y)));
  return rays;
}

}  // namespace

std::vector<std::pair<int, int>> active_pixels(const Image& I_k,
                                               const DepthFilterGrid& depth,
                                               const GnConfig& cfg) {
  Image gx, gy;
  central_diff(I_k, &gx, &gy);
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < I_k.height(); ++y)
    for (int x = 0; x < I_k.width(); ++x) {
      if (!depth.usable(x, y) || !(depth.at(x, y).mu > 0)) continue;
      const double g = std::hypot(gx.at(x, y), gy.at(x, y));
      if (g > cfg.gradient_min) out.emplace_back(x, y);
    }
  return out;
}

PhotometricSystem compute_residuals(const Image& I_k,
                                    const FrameObservation& frame,
                                    const DepthFilterGrid& depth,
                                    const CameraIntrinsics& K,
                                    const GnConfig& cfg) {
  std::vector<FrameObservation> fr = {frame};
  auto views = make_views<double>(I_k, fr, depth, cfg);
  views[0].opt_pose = true;

  PhotometricSystem sys;
  sys.pixels = active_pixels(I_k, depth, cfg);
  const auto rays = pixel_rays(sys.pixels, K);
  std::vector<double> d(sys.pixels.size());
  for (size_t i = 0; i < sys.pixels.size(); ++i) {
    const auto [x, y] = sys.pixels[i];
    d[i] = depth.at(x, y).expected_depth();
  }
  const RowsT<double> rows =
      assemble(I_k, views, sys.pixels, rays, d, K, cfg, true);
  if (rows.r.empty())
    throw EmptySystem("no valid photometric residual row");
  sys.r = rows.r;
  sys.J_D = rows.jd;
  sys.J_T = rows.jt;
  sys.row_pixel = rows.pix;
  return sys;
}

GnStep gn_step(const PhotometricSystem& sys, double lambda) {
  RowsT<double> rows;
  rows.r = sys.r;
  rows.jd = sys.J_D;
  rows.jt = sys.J_T;
  rows.pix = sys.row_pixel;
  rows.has_pose.assign(sys.r.size(), 1);
  StepT<double> step;
  if (!step_from_rows(rows, sys.pixels.size(), lambda, &step))
    throw SingularSystem("pose block of the photometric system is singular");
  GnStep out;
  out.d_depth = Eigen::Map<const VecX>(step.d_depth.data(),
                                       static_cast<int>(step.d_depth.size()));
  out.d_pose = step.d_pose;
  return out;
}

OptimizeResult optimize(const Image& I_k,
                        const std::vector<FrameObservation>& frames,
                        const DepthFilterGrid& depth, const CameraIntrinsics& K,
                        const GnConfig& cfg) {
  auto views = make_views<double>(I_k, frames, depth, cfg);
  OptimizeResult res;
  res.pixels = active_pixels(I_k, depth, cfg);
  const auto rays = pixel_rays(res.pixels, K);
  std::vector<double> d(res.pixels.size());
  for (size_t i = 0; i < res.pixels.size(); ++i) {
    const auto [x, y] = res.pixels[i];
    d[i] = depth.at(x, y).expected_depth();
  }
  auto out = optimize_t<double>(I_k, views, res.pixels, rays, std::move(d), K,
                                cfg);
  res.depth = std::move(out.depth);
  res.pose = Se3(out.pose.R, out.pose.t);
  res.initial_cost = out.cost0;
  res.final_cost = out.cost;
  res.accepted_steps = out.accepted;
  return res;
}

GnJvp optimize_gradients(const Image& I_k,
                         const std::vector<FrameObservation>& frames,
                         const DepthFilterGrid& depth,
                         const CameraIntrinsics& K, const GnSeed& seed,
                         const GnConfig& cfg) {
  auto views = make_views<Dual>(I_k, frames, depth, cfg);
  if (!seed.d_gamma.empty()) {
    if (seed.d_gamma.size() != frames.size())
      throw DimensionMismatch("gamma seed count differs from frame count");
    for (size_t i = 0; i < frames.size(); ++i) {
      if (seed.d_gamma[i].rows() != I_k.height() ||
          seed.d_gamma[i].cols() != I_k.width())
        throw DimensionMismatch("gamma seed size differs from image");
      views[i].dgamma = &seed.d_gamma[i];
    }
  }
  const bool have_ddepth = seed.d_depth.size() > 0;
  if (have_ddepth && (seed.d_depth.rows() != I_k.height() ||
                      seed.d_depth.cols() != I_k.width()))
    throw DimensionMismatch("depth seed size differs from image");

  // seed the last frame's pose along the left-tangent direction
  Vec6T<Dual> xi;
  for (int i = 0; i < 6; ++i) xi(i) = Dual(0.0, seed.d_pose(i));
  views.back().pose = compose(exp_pose(xi), views.back().pose);

  const auto pixels = active_pixels(I_k, depth, cfg);
  const auto rays = pixel_rays(pixels, K);
  std::vector<Dual> d(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) {
    const auto [x, y] = pixels[i];
    d[i] = Dual(depth.at(x, y).expected_depth(),
                have_ddepth ? seed.d_depth(y, x) : 0.0);
  }
  auto out = optimize_t<Dual>(I_k, views, pixels, rays, std::move(d), K, cfg);

  GnJvp jvp;
  jvp.primal.pixels = pixels;
  jvp.primal.depth.resize(out.depth.size());
  jvp.d_depth.resize(static_cast<int>(out.depth.size()));
  for (size_t i = 0; i < out.depth.size(); ++i) {
    jvp.primal.depth[i] = out.depth[i].v;
    jvp.d_depth(static_cast<int>(i)) = out.depth[i].d;
  }
  Mat3 R0, dR;
  Vec3 t0, dt;
  for (int i = 0; i < 3; ++i) {
    t0(i) = out.pose.t(i).v;
    dt(i) = out.pose.t(i).d;
    for (int j = 0; j < 3; ++j) {
      R0(i, j) = out.pose.R(i, j).v;
      dR(i, j) = out.pose.R(i, j).d;
    }
  }
  jvp.primal.pose = Se3(R0, t0);
  jvp.primal.initial_cost = out.cost0.v;
  jvp.primal.final_cost = out.cost.v;
  jvp.primal.accepted_steps = out.accepted;
  const Mat3 M = dR * R0.transpose();
  Vec3 phi(0.5 * (M(2, 1) - M(1, 2)), 0.5 * (M(0, 2) - M(2, 0)),
           0.5 * (M(1, 0) - M(0, 1)));
  jvp.d_pose.head<3>() = dt - M * t0;
  jvp.d_pose.tail<3>() = phi;
  jvp.d_cost = out.cost.d;
  return jvp;
}

}  // namespace vo
