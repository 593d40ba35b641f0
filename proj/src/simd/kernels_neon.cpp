// AArch64 Advanced SIMD variants (2 x f64 lanes). Uses separate multiply and
// add so results match the scalar reference bit for bit.

#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "tpvd/simd/kernels.hpp"

namespace tpvd::simd::detail {
namespace {

constexpr std::size_t kLanes = 2;

void axpy_neon(double* acc, double a, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) acc[i] += a * x[i];
}

void mul_acc_neon(double* acc, const double* w, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), vmulq_f64(vld1q_f64(w + i), vld1q_f64(x + i))));
  }
  for (; i < n; ++i) acc[i] += w[i] * x[i];
}

void sq_dist_neon(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                  double qy, double qz, double* out) {
  const float64x2_t vqx = vdupq_n_f64(qx);
  const float64x2_t vqy = vdupq_n_f64(qy);
  const float64x2_t vqz = vdupq_n_f64(qz);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t dx = vsubq_f64(vld1q_f64(xs + i), vqx);
    const float64x2_t dy = vsubq_f64(vld1q_f64(ys + i), vqy);
    const float64x2_t dz = vsubq_f64(vld1q_f64(zs + i), vqz);
    float64x2_t s = vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy));
    vst1q_f64(out + i, vaddq_f64(s, vmulq_f64(dz, dz)));
  }
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

ErrorMoments error_moments_neon(const double* pred, const double* gt, std::size_t n) {
  const float64x2_t one = vdupq_n_f64(1.0);
  float64x2_t s_abs = vdupq_n_f64(0.0);
  float64x2_t s_sq = s_abs;
  float64x2_t s_iabs = s_abs;
  float64x2_t s_isq = s_abs;
  float64x2_t s_rel = s_abs;
  ErrorMoments m;
  const double thresholds[3] = {1.25, 1.5625, 1.953125};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t x = vld1q_f64(pred + i);
    const float64x2_t y = vld1q_f64(gt + i);
    const float64x2_t d = vsubq_f64(y, x);
    const float64x2_t ad = vabsq_f64(d);
    const float64x2_t id = vsubq_f64(vdivq_f64(one, y), vdivq_f64(one, x));
    s_abs = vaddq_f64(s_abs, ad);
    s_sq = vaddq_f64(s_sq, vmulq_f64(d, d));
    s_iabs = vaddq_f64(s_iabs, vabsq_f64(id));
    s_isq = vaddq_f64(s_isq, vmulq_f64(id, id));
    s_rel = vaddq_f64(s_rel, vdivq_f64(ad, y));
    const float64x2_t ratio = vmaxq_f64(vdivq_f64(y, x), vdivq_f64(x, y));
    for (int t = 0; t < 3; ++t) {
      const uint64x2_t hit = vcltq_f64(ratio, vdupq_n_f64(thresholds[t]));
      m.delta_hits[t] += (vgetq_lane_u64(hit, 0) & 1u) + (vgetq_lane_u64(hit, 1) & 1u);
    }
  }
  m.sum_abs = vaddvq_f64(s_abs);
  m.sum_sq = vaddvq_f64(s_sq);
  m.sum_inv_abs = vaddvq_f64(s_iabs);
  m.sum_inv_sq = vaddvq_f64(s_isq);
  m.sum_rel = vaddvq_f64(s_rel);
  for (; i < n; ++i) {
    const double x = pred[i];
    const double y = gt[i];
    const double d = y - x;
    const double id = 1.0 / y - 1.0 / x;
    m.sum_abs += std::abs(d);
    m.sum_sq += d * d;
    m.sum_inv_abs += std::abs(id);
    m.sum_inv_sq += id * id;
    m.sum_rel += std::abs(d) / y;
    const double ratio = std::max(y / x, x / y);
    for (int t = 0; t < 3; ++t) {
      if (ratio < thresholds[t]) ++m.delta_hits[t];
    }
  }
  return m;
}

}  // namespace

KernelTable neon_table() {
  return {Isa::neon, axpy_neon, mul_acc_neon, sq_dist_neon, error_moments_neon};
}

}  // namespace tpvd::simd::detail
