#include "tpvd/filter.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tpvd/error.hpp"
#include "tpvd/simd/kernels.hpp"

namespace tpvd {

void Filter2::validate() const {
  for (double w : weights) {
    if (!std::isfinite(w)) throw DomainError("3x3 filter weights must be finite");
  }
}

MaskedGrid apply_filter(const MaskedGrid& grid, const Filter2& filter) {
  filter.validate();
  if (filter.is_identity()) return grid;

  const int rows = grid.rows();
  const int cols = grid.cols();
  const auto n = grid.size();
  const auto values = grid.values();
  std::vector<double> mask(n);
  std::transform(grid.mask().begin(), grid.mask().end(), mask.begin(),
                 [](std::uint8_t m) { return m ? 1.0 : 0.0; });
  std::vector<double> num(n, 0.0);
  std::vector<double> den(n, 0.0);
  const auto& k = simd::kernels();

  double total = 0.0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      const double w = filter.weights[(dr + 1) * 3 + (dc + 1)];
      total += w;
      if (w == 0.0) continue;
      const int c0 = std::max(0, -dc);
      const int c1 = std::min(cols, cols - dc);
      if (c1 <= c0) continue;
      const auto len = static_cast<std::size_t>(c1 - c0);
      for (int r = std::max(0, -dr); r < std::min(rows, rows - dr); ++r) {
        const auto dst = grid.index(r, c0);
        const auto src = grid.index(r + dr, c0 + dc);
        k.axpy(num.data() + dst, w, values.data() + src, len);
        k.axpy(den.data() + dst, w, mask.data() + src, len);
      }
    }
  }

  MaskedGrid out(rows, cols);
  auto out_values = out.mutable_values();
  auto out_mask = out.mutable_mask();
  for (std::size_t i = 0; i < n; ++i) {
    if (grid.mask()[i] == 0) continue;
    double v = num[i];
    if (den[i] != 0.0 && total != 0.0) v = v * (total / den[i]);
    out_values[i] = v;
    out_mask[i] = 1;
  }
  return out;
}

}  // namespace tpvd
