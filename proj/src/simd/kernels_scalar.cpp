#include <algorithm>
#include <cmath>

#include "tpvd/simd/kernels.hpp"

namespace tpvd::simd::detail {
namespace {

void axpy_scalar(double* acc, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += a * x[i];
}

void mul_acc_scalar(double* acc, const double* w, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += w[i] * x[i];
}

void sq_dist_scalar(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                    double qy, double qz, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - qx;
    const double dy = ys[i] - qy;
    const double dz = zs[i] - qz;
    out[i] = dx * dx + dy * dy + dz * dz;
  }
}

ErrorMoments error_moments_scalar(const double* pred, const double* gt, std::size_t n) {
  ErrorMoments m;
  for (std::size_t i = 0; i < n; ++i) {
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

KernelTable scalar_table() {
  return {Isa::scalar, axpy_scalar, mul_acc_scalar, sq_dist_scalar, error_moments_scalar};
}

}  // namespace tpvd::simd::detail
