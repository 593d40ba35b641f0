// Compiled with -mavx2 (no FMA: products and sums must round exactly like
// the scalar reference).

#include <immintrin.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "tpvd/simd/kernels.hpp"

namespace tpvd::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

inline double hsum(__m256d v) {
  alignas(32) double tmp[kLanes];
  _mm256_store_pd(tmp, v);
  return (tmp[0] + tmp[1]) + (tmp[2] + tmp[3]);
}

void axpy_avx2(double* acc, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
  }
  for (; i < n; ++i) acc[i] += a * x[i];
}

void mul_acc_avx2(double* acc, const double* w, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
  }
  for (; i < n; ++i) acc[i] += w[i] * x[i];
}

void sq_dist_avx2(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                  double qy, double qz, double* out) {
  const __m256d vqx = _mm256_set1_pd(qx);
  const __m256d vqy = _mm256_set1_pd(qy);
  const __m256d vqz = _mm256_set1_pd(qz);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), vqx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), vqy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), vqz);
    __m256d s = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    s = _mm256_add_pd(s, _mm256_mul_pd(dz, dz));
    _mm256_storeu_pd(out + i, s);
  }
  for (; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

ErrorMoments error_moments_avx2(const double* pred, const double* gt, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d t1 = _mm256_set1_pd(1.25);
  const __m256d t2 = _mm256_set1_pd(1.5625);
  const __m256d t3 = _mm256_set1_pd(1.953125);
  __m256d s_abs = _mm256_setzero_pd();
  __m256d s_sq = _mm256_setzero_pd();
  __m256d s_iabs = _mm256_setzero_pd();
  __m256d s_isq = _mm256_setzero_pd();
  __m256d s_rel = _mm256_setzero_pd();
  ErrorMoments m;
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d x = _mm256_loadu_pd(pred + i);
    const __m256d y = _mm256_loadu_pd(gt + i);
    const __m256d d = _mm256_sub_pd(y, x);
    const __m256d ad = abs_pd(d);
    const __m256d id = _mm256_sub_pd(_mm256_div_pd(one, y), _mm256_div_pd(one, x));
    s_abs = _mm256_add_pd(s_abs, ad);
    s_sq = _mm256_add_pd(s_sq, _mm256_mul_pd(d, d));
    s_iabs = _mm256_add_pd(s_iabs, abs_pd(id));
    s_isq = _mm256_add_pd(s_isq, _mm256_mul_pd(id, id));
    s_rel = _mm256_add_pd(s_rel, _mm256_div_pd(ad, y));
    const __m256d ratio = _mm256_max_pd(_mm256_div_pd(y, x), _mm256_div_pd(x, y));
    m.delta_hits[0] += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_cmp_pd(ratio, t1, _CMP_LT_OQ))));
    m.delta_hits[1] += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_cmp_pd(ratio, t2, _CMP_LT_OQ))));
    m.delta_hits[2] += std::popcount(static_cast<unsigned>(_mm256_movemask_pd(_mm256_cmp_pd(ratio, t3, _CMP_LT_OQ))));
  }
  m.sum_abs = hsum(s_abs);
  m.sum_sq = hsum(s_sq);
  m.sum_inv_abs = hsum(s_iabs);
  m.sum_inv_sq = hsum(s_isq);
  m.sum_rel = hsum(s_rel);
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
    if (ratio < 1.25) ++m.delta_hits[0];
    if (ratio < 1.5625) ++m.delta_hits[1];
    if (ratio < 1.953125) ++m.delta_hits[2];
  }
  return m;
}

}  // namespace

KernelTable avx2_table() {
  return {Isa::avx2, axpy_avx2, mul_acc_avx2, sq_dist_avx2, error_moments_avx2};
}

}  // namespace tpvd::simd::detail
