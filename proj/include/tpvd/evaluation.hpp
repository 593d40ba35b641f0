#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tpvd/grid.hpp"

namespace tpvd {

/// Depth metrics over the pixels that are valid in the ground truth.
/// Distances in meters, inverse errors in 1/km, deltas in percent.
struct MetricsReport {
  double rmse = 0.0;
  double mae = 0.0;
  double irmse = 0.0;
  double imae = 0.0;
  double rel = 0.0;
  double rmselog = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t n_valid = 0;

  double rmse_mm() const { return rmse * 1000.0; }
  double mae_mm() const { return mae * 1000.0; }
};

// Throws DimensionError on a shape mismatch, DomainError when gt has no
// valid pixel and EvaluationError when pred is missing or non-positive on
// one of them.
MetricsReport evaluate(const SparseDepthMap& pred, const SparseDepthMap& gt);

// Component-wise mean of several reports; n_valid is summed.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

struct LossBreakdown {
  std::array<double, 3> l1{};  // per view, ViewTag order
  std::array<double, 3> l2{};
  std::array<double, 3> view{};
  double total = 0.0;
};

inline constexpr double kDefaultAlpha = 0.6;
inline constexpr double kDefaultBeta = 0.2;

/// L_view = mean |pred - gt| + mean (pred - gt)^2 over gt-valid cells, and
/// total = L_front + alpha L_top + beta L_side.
///
/// A view with a non-zero weight must have at least one gt-valid cell
/// (DomainError), and pred must be valid wherever gt is (EvaluationError).
/// Views weighted zero contribute nothing and may be empty.
LossBreakdown loss_total(const std::array<const MaskedGrid*, 3>& pred, const std::array<const MaskedGrid*, 3>& gt,
                         double alpha = kDefaultAlpha, double beta = kDefaultBeta);

}  // namespace tpvd
