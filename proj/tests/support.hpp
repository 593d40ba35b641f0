#pragma once

// Shared generators for the unit and acceptance tests.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "tpvd/grid.hpp"

namespace tpvd::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Each cell valid with probability `density`, depth uniform in [lo, hi).
inline SparseDepthMap random_sparse(std::mt19937_64& rng, int rows, int cols, double density, double lo = 1.0,
                                    double hi = 70.0) {
  SparseDepthMap m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (uniform(rng, 0.0, 1.0) < density) m.set(r, c, uniform(rng, lo, hi));
    }
  }
  return m;
}

inline MaskedGrid random_dense(std::mt19937_64& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  MaskedGrid m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m.set(r, c, uniform(rng, lo, hi));
  }
  return m;
}

// Fresh empty directory under the system temp dir, unique per test name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tpvd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tpvd::test
