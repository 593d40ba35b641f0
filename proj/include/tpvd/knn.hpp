#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tpvd/grid.hpp"

namespace tpvd {

/// Exact k-nearest-neighbour search over a fixed point set.
///
/// Neighbours are ordered by (squared Euclidean distance, point index), so
/// ties always fall to the lower index and a point is its own first
/// neighbour unless it has an exact duplicate with a lower index.
class KnnIndex {
 public:
  enum class Method { automatic, brute_force, kd_tree };

  explicit KnnIndex(std::span<const Vec3> points, Method method = Method::automatic);

  std::size_t size() const { return ids_.size(); }
  Method method() const { return method_; }

  // Indices of the k nearest points to q. Throws DomainError if k > size().
  std::vector<std::size_t> query(const Vec3& q, std::size_t k) const;

  // Row-major N x k table of neighbours of every indexed point.
  std::vector<std::size_t> query_all(std::size_t k) const;

 private:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, std::size_t k, std::vector<std::pair<double, std::size_t>>& heap,
              std::vector<double>& scratch) const;
  void scan(std::size_t begin, std::size_t end, const Vec3& q, std::size_t k,
            std::vector<std::pair<double, std::size_t>>& heap, std::vector<double>& scratch) const;

  Method method_;
  // Points permuted into leaf order, struct-of-arrays.
  std::vector<double> xs_, ys_, zs_;
  std::vector<std::size_t> ids_;
  std::vector<Node> nodes_;
};

}  // namespace tpvd
