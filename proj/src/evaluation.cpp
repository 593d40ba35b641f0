#include "tpvd/evaluation.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "tpvd/error.hpp"
#include "tpvd/simd/kernels.hpp"

namespace tpvd {
namespace {

void check_shapes(const MaskedGrid& pred, const MaskedGrid& gt) {
  if (!pred.same_shape(gt)) {
    throw DimensionError("prediction is " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                         " but ground truth is " + std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()));
  }
}

std::string where(int r, int c) { return "(" + std::to_string(r) + ", " + std::to_string(c) + ")"; }

}  // namespace

MetricsReport evaluate(const SparseDepthMap& pred, const SparseDepthMap& gt) {
  check_shapes(pred, gt);
  std::vector<double> p;
  std::vector<double> g;
  p.reserve(gt.valid_count());
  g.reserve(gt.valid_count());
  for (int r = 0; r < gt.rows(); ++r) {
    for (int c = 0; c < gt.cols(); ++c) {
      if (!gt.valid(r, c)) continue;
      const double y = gt.value(r, c);
      if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("ground truth depth at " + where(r, c) + " is not positive");
      const double x = pred.value(r, c);
      if (!pred.valid(r, c) || !(x > 0.0) || !std::isfinite(x)) {
        throw EvaluationError("prediction has no positive depth at ground-truth pixel " + where(r, c));
      }
      p.push_back(x);
      g.push_back(y);
    }
  }
  if (g.empty()) throw DomainError("ground truth has no valid pixel");

  const auto m = simd::kernels().error_moments(p.data(), g.data(), p.size());
  double sum_log_sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::log(g[i]) - std::log(p[i]);
    sum_log_sq += d * d;
  }

  const double n = static_cast<double>(p.size());
  MetricsReport rep;
  rep.n_valid = p.size();
  rep.rmse = std::sqrt(m.sum_sq / n);
  rep.mae = m.sum_abs / n;
  rep.irmse = 1000.0 * std::sqrt(m.sum_inv_sq / n);
  rep.imae = 1000.0 * m.sum_inv_abs / n;
  rep.rel = m.sum_rel / n;
  rep.rmselog = std::sqrt(sum_log_sq / n);
  rep.delta1 = 100.0 * static_cast<double>(m.delta_hits[0]) / n;
  rep.delta2 = 100.0 * static_cast<double>(m.delta_hits[1]) / n;
  rep.delta3 = 100.0 * static_cast<double>(m.delta_hits[2]) / n;
  return rep;
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw DomainError("no reports to average");
  MetricsReport out;
  for (const auto& r : reports) {
    out.rmse += r.rmse;
    out.mae += r.mae;
    out.irmse += r.irmse;
    out.imae += r.imae;
    out.rel += r.rel;
    out.rmselog += r.rmselog;
    out.delta1 += r.delta1;
    out.delta2 += r.delta2;
    out.delta3 += r.delta3;
    out.n_valid += r.n_valid;
  }
  const double n = static_cast<double>(reports.size());
  out.rmse /= n;
  out.mae /= n;
  out.irmse /= n;
  out.imae /= n;
  out.rel /= n;
  out.rmselog /= n;
  out.delta1 /= n;
  out.delta2 /= n;
  out.delta3 /= n;
  return out;
}

LossBreakdown loss_total(const std::array<const MaskedGrid*, 3>& pred, const std::array<const MaskedGrid*, 3>& gt,
                         double alpha, double beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0) {
    throw DomainError("loss weights must be finite and non-negative");
  }
  static constexpr const char* kNames[3] = {"front", "top", "side"};
  const double weights[3] = {1.0, alpha, beta};
  LossBreakdown out;
  for (int v = 0; v < 3; ++v) {
    if (!pred[v] || !gt[v]) throw DomainError(std::string(kNames[v]) + " view is missing");
    const MaskedGrid& p = *pred[v];
    const MaskedGrid& g = *gt[v];
    check_shapes(p, g);
    double sum_abs = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < g.rows(); ++r) {
      for (int c = 0; c < g.cols(); ++c) {
        if (!g.valid(r, c)) continue;
        if (!p.valid(r, c)) {
          throw EvaluationError(std::string(kNames[v]) + " prediction is missing ground-truth cell " + where(r, c));
        }
        const double d = p.value(r, c) - g.value(r, c);
        sum_abs += std::abs(d);
        sum_sq += d * d;
        ++n;
      }
    }
    if (n == 0) {
      if (weights[v] != 0.0) throw DomainError(std::string(kNames[v]) + " ground truth has no valid cell");
      continue;
    }
    out.l1[v] = sum_abs / static_cast<double>(n);
    out.l2[v] = sum_sq / static_cast<double>(n);
    out.view[v] = out.l1[v] + out.l2[v];
  }
  out.total = out.view[0] + alpha * out.view[1] + beta * out.view[2];
  return out;
}

}  // namespace tpvd
