#pragma once

#include <array>

#include "tpvd/grid.hpp"

namespace tpvd {

/// 3x3 cross-correlation kernel, row-major: weights[(dr + 1) * 3 + (dc + 1)]
/// multiplies the cell at offset (dr, dc).
struct Filter2 {
  std::array<double, 9> weights{0, 0, 0, 0, 1, 0, 0, 0, 0};

  static Filter2 identity() { return {}; }
  static Filter2 box() {
    Filter2 f;
    f.weights.fill(1.0 / 9.0);
    return f;
  }
  bool is_identity() const { return weights == identity().weights; }
  void validate() const;
};

/// Masked 3x3 filtering with zero padding.
///
/// Only valid cells are read and only valid cells are written; the output
/// mask equals the input mask. With S_all the sum of all nine weights and
/// S_valid the sum over the taps that hit valid cells, each output is
/// sum(w * v) * S_all / S_valid, which keeps constant fields fixed at
/// borders and holes. When either sum is zero the raw sum is returned.
MaskedGrid apply_filter(const MaskedGrid& grid, const Filter2& filter);

}  // namespace tpvd
