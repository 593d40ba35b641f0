#pragma once

// Data-parallel inner loops shared by the convolution, propagation, KNN and
// metric code. Every kernel has a scalar reference; vector variants are
// selected once at runtime from what the CPU reports.
//
// Lane-wise kernels (axpy, mul_acc, sq_dist) evaluate the same operations in
// the same order as the scalar reference and are bit-identical to it. The
// reduction kernel (error_moments) reassociates sums and only agrees to
// rounding.

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace tpvd::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

// Sums over a dense (pred, gt) sample, gt and pred strictly positive.
struct ErrorMoments {
  double sum_abs = 0.0;      // |gt - pred|
  double sum_sq = 0.0;       // (gt - pred)^2
  double sum_inv_abs = 0.0;  // |1/gt - 1/pred|
  double sum_inv_sq = 0.0;   // (1/gt - 1/pred)^2
  double sum_rel = 0.0;      // |gt - pred| / gt
  std::array<std::size_t, 3> delta_hits{};  // max(gt/pred, pred/gt) < 1.25^i
};

struct KernelTable {
  Isa isa = Isa::scalar;
  // acc[i] += a * x[i]
  void (*axpy)(double* acc, double a, const double* x, std::size_t n) = nullptr;
  // acc[i] += w[i] * x[i]
  void (*mul_acc)(double* acc, const double* w, const double* x, std::size_t n) = nullptr;
  // out[i] = (xs[i]-qx)^2 + (ys[i]-qy)^2 + (zs[i]-qz)^2, summed left to right
  void (*sq_dist)(const double* xs, const double* ys, const double* zs, std::size_t n, double qx,
                  double qy, double qz, double* out) = nullptr;
  ErrorMoments (*error_moments)(const double* pred, const double* gt, std::size_t n) = nullptr;
};

// ISAs compiled in and supported by the running CPU; scalar is always first.
std::vector<Isa> available_isas();

// Table for a specific ISA. Throws DomainError if it is not available.
const KernelTable& kernels_for(Isa isa);

// Active table. Defaults to the widest available ISA; the TPVD_SIMD
// environment variable ("scalar", "avx2", "neon") overrides the choice.
const KernelTable& kernels();

// Switches the active table; returns the previous ISA. Test hook.
Isa set_active_isa(Isa isa);

namespace detail {
KernelTable scalar_table();
#if defined(TPVD_HAVE_AVX2)
KernelTable avx2_table();
#endif
#if defined(TPVD_HAVE_NEON)
KernelTable neon_table();
#endif
}  // namespace detail

}  // namespace tpvd::simd
