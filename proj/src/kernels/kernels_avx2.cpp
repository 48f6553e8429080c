// SPDX-License-Identifier: Apache-2.0
// AVX2 variants of the dense kernels. Every lane evaluates the same
// expression tree as the scalar reference and the TU is built with
// -ffp-contract=off, so results are bit-identical to the scalar backend.
#if defined(__x86_64__)

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "vo/kernels/kernels.hpp"

namespace vo::kernels::detail {

namespace {

// Bilinear sample of four points; lanes outside the image come back as 0
// with a zeroed mask lane.
inline void bilerp4(const double* img, int h, int w, __m256d x, __m256d y,
                    __m256d* val, __m256d* mask) {
  const __m256d x0d = _mm256_floor_pd(x);
  const __m256d y0d = _mm256_floor_pd(y);
  const __m128i x0 = _mm256_cvtpd_epi32(x0d);
  const __m128i y0 = _mm256_cvtpd_epi32(y0d);

  const __m128i neg1 = _mm_set1_epi32(-1);
  const __m128i ok = _mm_and_si128(
      _mm_and_si128(_mm_cmpgt_epi32(x0, neg1),
                    _mm_cmpgt_epi32(_mm_set1_epi32(w - 1), x0)),
      _mm_and_si128(_mm_cmpgt_epi32(y0, neg1),
                    _mm_cmpgt_epi32(_mm_set1_epi32(h - 1), y0)));

  __m128i idx = _mm_add_epi32(_mm_mullo_epi32(y0, _mm_set1_epi32(w)), x0);
  idx = _mm_and_si128(idx, ok);  // out-of-bounds lanes gather img[0]

  const __m256d v00 = _mm256_i32gather_pd(img, idx, 8);
  const __m256d v01 =
      _mm256_i32gather_pd(img, _mm_add_epi32(idx, _mm_set1_epi32(1)), 8);
  const __m256d v10 =
      _mm256_i32gather_pd(img, _mm_add_epi32(idx, _mm_set1_epi32(w)), 8);
  const __m256d v11 =
      _mm256_i32gather_pd(img, _mm_add_epi32(idx, _mm_set1_epi32(w + 1)), 8);

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ax = _mm256_sub_pd(x, x0d);
  const __m256d ay = _mm256_sub_pd(y, y0d);
  const __m256d top = _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(one, ax), v00),
                                    _mm256_mul_pd(ax, v01));
  const __m256d bot = _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(one, ax), v10),
                                    _mm256_mul_pd(ax, v11));
  const __m256d v = _mm256_add_pd(_mm256_mul_pd(_mm256_sub_pd(one, ay), top),
                                  _mm256_mul_pd(ay, bot));

  const __m256d m = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(ok));
  *val = _mm256_and_pd(v, m);
  *mask = m;
}

}  // namespace

double reduce_sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double t[4];
  _mm256_store_pd(t, acc);
  double s = (t[0] + t[1]) + (t[2] + t[3]);
  for (; i < n; ++i) s += x[i];
  return s;
}

double reduce_dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc,
                        _mm256_mul_pd(_mm256_loadu_pd(x + i),
                                      _mm256_loadu_pd(y + i)));
  alignas(32) double t[4];
  _mm256_store_pd(t, acc);
  double s = (t[0] + t[1]) + (t[2] + t[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void bilinear_batch_avx2(const double* img, int h, int w, const double* xs,
                         const double* ys, std::size_t n, double* out,
                         std::uint8_t* valid) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v, m;
    bilerp4(img, h, w, _mm256_loadu_pd(xs + i), _mm256_loadu_pd(ys + i), &v,
            &m);
    _mm256_storeu_pd(out + i, v);
    const int bits = _mm256_movemask_pd(m);
    valid[i] = bits & 1;
    valid[i + 1] = (bits >> 1) & 1;
    valid[i + 2] = (bits >> 2) & 1;
    valid[i + 3] = (bits >> 3) & 1;
  }
  if (i < n) bilinear_batch_scalar(img, h, w, xs + i, ys + i, n - i, out + i,
                                   valid + i);
}

void flow_consistency_avx2(const double* fwd_x, const double* fwd_y,
                           const double* bwd_x, const double* bwd_y, int h,
                           int w, double max_err, double min_mag,
                           std::uint8_t* keep, double* err) {
  const __m256d vmax_err = _mm256_set1_pd(max_err);
  const __m256d vmin_mag = _mm256_set1_pd(min_mag);
  const __m256d lane_off = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  for (int py = 0; py < h; ++py) {
    const std::size_t row = static_cast<std::size_t>(py) * w;
    const __m256d vy = _mm256_set1_pd(static_cast<double>(py));
    int px = 0;
    for (; px + 4 <= w; px += 4) {
      const std::size_t i = row + px;
      const __m256d fx = _mm256_loadu_pd(fwd_x + i);
      const __m256d fy = _mm256_loadu_pd(fwd_y + i);
      const __m256d vpx =
          _mm256_add_pd(_mm256_set1_pd(static_cast<double>(px)), lane_off);
      const __m256d qx = _mm256_add_pd(vpx, fx);
      const __m256d qy = _mm256_add_pd(vy, fy);
      __m256d bx, by, m, m2;
      bilerp4(bwd_x, h, w, qx, qy, &bx, &m);
      bilerp4(bwd_y, h, w, qx, qy, &by, &m2);
      const __m256d ex = _mm256_add_pd(fx, bx);
      const __m256d ey = _mm256_add_pd(fy, by);
      const __m256d e = _mm256_sqrt_pd(
          _mm256_add_pd(_mm256_mul_pd(ex, ex), _mm256_mul_pd(ey, ey)));
      const __m256d mag = _mm256_sqrt_pd(
          _mm256_add_pd(_mm256_mul_pd(fx, fx), _mm256_mul_pd(fy, fy)));
      _mm256_storeu_pd(err + i, _mm256_and_pd(e, m));
      const __m256d ok = _mm256_and_pd(
          m, _mm256_and_pd(_mm256_cmp_pd(e, vmax_err, _CMP_LT_OQ),
                           _mm256_cmp_pd(mag, vmin_mag, _CMP_GT_OQ)));
      const int bits = _mm256_movemask_pd(ok);
      keep[i] = bits & 1;
      keep[i + 1] = (bits >> 1) & 1;
      keep[i + 2] = (bits >> 2) & 1;
      keep[i + 3] = (bits >> 3) & 1;
    }
    for (; px < w; ++px) {
      const std::size_t i = row + px;
      const double fxs = fwd_x[i], fys = fwd_y[i];
      const double qxs = px + fxs, qys = py + fys;
      double bxs, bys;
      std::uint8_t ok, ok2;
      bilinear_batch_scalar(bwd_x, h, w, &qxs, &qys, 1, &bxs, &ok);
      if (!ok) {
        keep[i] = 0;
        err[i] = 0;
        continue;
      }
      bilinear_batch_scalar(bwd_y, h, w, &qxs, &qys, 1, &bys, &ok2);
      const double exs = fxs + bxs, eys = fys + bys;
      const double e = std::sqrt(exs * exs + eys * eys);
      const double mag = std::sqrt(fxs * fxs + fys * fys);
      err[i] = e;
      keep[i] = (e < max_err && mag > min_mag) ? 1 : 0;
    }
  }
}

void weighted_diff_avx2(const double* a, const double* b, const double* inv_w,
                        const std::uint8_t* valid, std::size_t n, double* r) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                    _mm256_loadu_pd(b + i));
    const __m256d v = _mm256_mul_pd(d, _mm256_loadu_pd(inv_w + i));
    int packed;
    __builtin_memcpy(&packed, valid + i, 4);
    const __m128i vb = _mm_cvtepu8_epi32(_mm_cvtsi32_si128(packed));
    const __m256d m = _mm256_castsi256_pd(
        _mm256_cvtepi32_epi64(_mm_cmpgt_epi32(vb, _mm_setzero_si128())));
    _mm256_storeu_pd(r + i, _mm256_and_pd(v, m));
  }
  for (; i < n; ++i) r[i] = valid[i] ? (a[i] - b[i]) * inv_w[i] : 0.0;
}

}  // namespace vo::kernels::detail

#endif  // __x86_64__
