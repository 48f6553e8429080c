// SPDX-License-Identifier: Apache-2.0
#include "vo/kernels/kernels.hpp"

#include <cmath>

#include "vo/core/errors.hpp"

namespace vo::kernels {

bool avx2_supported() {
#if defined(__x86_64__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {
Backend g_backend = avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

Backend backend() { return g_backend; }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported())
    throw NonPositiveInput("avx2 backend not supported on this cpu");
  g_backend = b;
}

const char* backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

namespace detail {

double reduce_sum_scalar(const double* x, std::size_t n) {
  double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i];
    a1 += x[i + 1];
    a2 += x[i + 2];
    a3 += x[i + 3];
  }
  double s = (a0 + a1) + (a2 + a3);
  for (; i < n; ++i) s += x[i];
  return s;
}

double reduce_dot_scalar(const double* x, const double* y, std::size_t n) {
  double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i];
    a1 += x[i + 1] * y[i + 1];
    a2 += x[i + 2] * y[i + 2];
    a3 += x[i + 3] * y[i + 3];
  }
  double s = (a0 + a1) + (a2 + a3);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void bilinear_batch_scalar(const double* img, int h, int w, const double* xs,
                           const double* ys, std::size_t n, double* out,
                           std::uint8_t* valid) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i], y = ys[i];
    const double x0d = std::floor(x), y0d = std::floor(y);
    // bounds tested in floating point: safe for huge or NaN coordinates
    if (!(x0d >= 0 && y0d >= 0 && x0d <= w - 2 && y0d <= h - 2)) {
      out[i] = 0;
      valid[i] = 0;
      continue;
    }
    const int x0 = static_cast<int>(x0d), y0 = static_cast<int>(y0d);
    const double ax = x - x0d, ay = y - y0d;
    const double* row = img + static_cast<std::size_t>(y0) * w + x0;
    const double v00 = row[0], v01 = row[1];
    const double v10 = row[w], v11 = row[w + 1];
    const double top = (1.0 - ax) * v00 + ax * v01;
    const double bot = (1.0 - ax) * v10 + ax * v11;
    out[i] = (1.0 - ay) * top + ay * bot;
    valid[i] = 1;
  }
}

void flow_consistency_scalar(const double* fwd_x, const double* fwd_y,
                             const double* bwd_x, const double* bwd_y, int h,
                             int w, double max_err, double min_mag,
                             std::uint8_t* keep, double* err) {
  for (int py = 0; py < h; ++py) {
    for (int px = 0; px < w; ++px) {
      const std::size_t i = static_cast<std::size_t>(py) * w + px;
      const double fx = fwd_x[i], fy = fwd_y[i];
      const double qx = px + fx, qy = py + fy;
      double bx, by;
      std::uint8_t ok;
      bilinear_batch_scalar(bwd_x, h, w, &qx, &qy, 1, &bx, &ok);
      if (!ok) {
        keep[i] = 0;
        err[i] = 0;
        continue;
      }
      std::uint8_t ok2;
      bilinear_batch_scalar(bwd_y, h, w, &qx, &qy, 1, &by, &ok2);
      const double ex = fx + bx, ey = fy + by;
      const double e = std::sqrt(ex * ex + ey * ey);
      const double mag = std::sqrt(fx * fx + fy * fy);
      err[i] = e;
      keep[i] = (e < max_err && mag > min_mag) ? 1 : 0;
    }
  }
}

void weighted_diff_scalar(const double* a, const double* b,
                          const double* inv_w, const std::uint8_t* valid,
                          std::size_t n, double* r) {
  for (std::size_t i = 0; i < n; ++i)
    r[i] = valid[i] ? (a[i] - b[i]) * inv_w[i] : 0.0;
}

}  // namespace detail

double reduce_sum(const double* x, std::size_t n) {
#if defined(__x86_64__)
  if (g_backend == Backend::Avx2) return detail::reduce_sum_avx2(x, n);
#endif
  return detail::reduce_sum_scalar(x, n);
}

double reduce_dot(const double* x, const double* y, std::size_t n) {
#if defined(__x86_64__)
  if (g_backend == Backend::Avx2) return detail::reduce_dot_avx2(x, y, n);
#endif
  return detail::reduce_dot_scalar(x, y, n);
}

void bilinear_batch(const double* img, int h, int w, const double* xs,
                    const double* ys, std::size_t n, double* out,
                    std::uint8_t* valid) {
#if defined(__x86_64__)
  if (g_backend == Backend::Avx2) {
    detail::bilinear_batch_avx2(img, h, w, xs, ys, n, out, valid);
    return;
  }
#endif
  detail::bilinear_batch_scalar(img, h, w, xs, ys, n, out, valid);
}

void flow_consistency(const double* fwd_x, const double* fwd_y,
                      const double* bwd_x, const double* bwd_y, int h, int w,
                      double max_err, double min_mag, std::uint8_t* keep,
                      double* err) {
#if defined(__x86_64__)
  if (g_backend == Backend::Avx2) {
    detail::flow_consistency_avx2(fwd_x, fwd_y, bwd_x, bwd_y, h, w, max_err,
                                  min_mag, keep, err);
    return;
  }
#endif
  detail::flow_consistency_scalar(fwd_x, fwd_y, bwd_x, bwd_y, h, w, max_err,
                                  min_mag, keep, err);
}

void weighted_diff(const double* a, const double* b, const double* inv_w,
                   const std::uint8_t* valid, std::size_t n, double* r) {
#if defined(__x86_64__)
  if (g_backend == Backend::Avx2) {
    detail::weighted_diff_avx2(a, b, inv_w, valid, n, r);
    return;
  }
#endif
  detail::weighted_diff_scalar(a, b, inv_w, valid, n, r);
}

}  // namespace vo::kernels
