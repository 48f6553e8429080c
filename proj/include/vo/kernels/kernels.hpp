// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

namespace vo::kernels {

// Vectorized variants must be bit-identical to the scalar reference; the
// reference fixes the accumulation order (groups of four, sequential tail)
// so both backends produce the same floating-point result.
enum class Backend { Scalar, Avx2 };

bool avx2_supported();
Backend backend();
void set_backend(Backend b);  // throws NonPositiveInput if unsupported
const char* backend_name(Backend b);

double reduce_sum(const double* x, std::size_t n);
double reduce_dot(const double* x, const double* y, std::size_t n);

// out[i] = bilinear sample of img (h×w, row-major) at (xs[i], ys[i]);
// valid[i] = 0 and out[i] = 0 when the four neighbours are not all inside.
void bilinear_batch(const double* img, int h, int w, const double* xs,
                    const double* ys, std::size_t n, double* out,
                    std::uint8_t* valid);

// Per-pixel forward-backward flow test on dense h×w fields. For pixel
// p=(x,y): q = p + fwd(p); e = ‖fwd(p) + bilinear(bwd, q)‖.
// keep = q sampleable ∧ e < max_err ∧ ‖fwd(p)‖ > min_mag; err[i] = e (0 when
// q not sampleable).
void flow_consistency(const double* fwd_x, const double* fwd_y,
                      const double* bwd_x, const double* bwd_y, int h, int w,
                      double max_err, double min_mag, std::uint8_t* keep,
                      double* err);

// r[i] = valid[i] ? (a[i] - b[i]) * inv_w[i] : 0
void weighted_diff(const double* a, const double* b, const double* inv_w,
                   const std::uint8_t* valid, std::size_t n, double* r);

namespace detail {
double reduce_sum_scalar(const double* x, std::size_t n);
double reduce_dot_scalar(const double* x, const double* y, std::size_t n);
void bilinear_batch_scalar(const double* img, int h, int w, const double* xs,
                           const double* ys, std::size_t n, double* out,
                           std::uint8_t* valid);
void flow_consistency_scalar(const double* fwd_x, const double* fwd_y,
                             const double* bwd_x, const double* bwd_y, int h,
                             int w, double max_err, double min_mag,
                             std::uint8_t* keep, double* err);
void weighted_diff_scalar(const double* a, const double* b,
                          const double* inv_w, const std::uint8_t* valid,
                          std::size_t n, double* r);
#if defined(__x86_64__)
double reduce_sum_avx2(const double* x, std::size_t n);
double reduce_dot_avx2(const double* x, const double* y, std::size_t n);
void bilinear_batch_avx2(const double* img, int h, int w, const double* xs,
                         const double* ys, std::size_t n, double* out,
                         std::uint8_t* valid);
void flow_consistency_avx2(const double* fwd_x, const double* fwd_y,
                           const double* bwd_x, const double* bwd_y, int h,
                           int w, double max_err, double min_mag,
                           std::uint8_t* keep, double* err);
void weighted_diff_avx2(const double* a, const double* b, const double* inv_w,
                        const std::uint8_t* valid, std::size_t n, double* r);
#endif
}  // namespace detail

}  // namespace vo::kernels
