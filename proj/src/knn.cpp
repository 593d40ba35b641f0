#include "tpvd/knn.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tpvd/error.hpp"
#include "tpvd/simd/kernels.hpp"

namespace tpvd {
namespace {

constexpr std::size_t kLeafSize = 32;
constexpr std::size_t kBruteForceLimit = 1024;

using Candidate = std::pair<double, std::size_t>;  // (squared distance, id)

// Max-heap on (distance, id): the front is the worst kept neighbour.
void offer(std::vector<Candidate>& heap, std::size_t k, Candidate c) {
  if (heap.size() < k) {
    heap.push_back(c);
    std::push_heap(heap.begin(), heap.end());
  } else if (c < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = c;
    std::push_heap(heap.begin(), heap.end());
  }
}

}  // namespace

KnnIndex::KnnIndex(std::span<const Vec3> points, Method method) : method_(method) {
  if (method_ == Method::automatic) {
    method_ = points.size() <= kBruteForceLimit ? Method::brute_force : Method::kd_tree;
  }
  ids_.resize(points.size());
  std::iota(ids_.begin(), ids_.end(), std::size_t{0});
  xs_.resize(points.size());
  ys_.resize(points.size());
  zs_.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    xs_[i] = points[i].x;
    ys_[i] = points[i].y;
    zs_[i] = points[i].z;
  }
  if (method_ == Method::kd_tree && !points.empty()) build(0, points.size());
}

int KnnIndex::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({-1, 0.0, begin, end, -1, -1});
  if (end - begin <= kLeafSize) return id;

  double lo[3] = {xs_[begin], ys_[begin], zs_[begin]};
  double hi[3] = {lo[0], lo[1], lo[2]};
  for (std::size_t i = begin; i < end; ++i) {
    const double p[3] = {xs_[i], ys_[i], zs_[i]};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  const std::vector<double>& key = axis == 0 ? xs_ : axis == 1 ? ys_ : zs_;
  std::vector<std::size_t> order(end - begin);
  std::iota(order.begin(), order.end(), begin);
  const std::size_t mid = (end - begin) / 2;
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mid), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] < key[b] || (key[a] == key[b] && ids_[a] < ids_[b]); });
  const double split = key[order[mid]];

  std::vector<double> x(order.size()), y(order.size()), z(order.size());
  std::vector<std::size_t> ids(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    x[i] = xs_[order[i]];
    y[i] = ys_[order[i]];
    z[i] = zs_[order[i]];
    ids[i] = ids_[order[i]];
  }
  std::copy(x.begin(), x.end(), xs_.begin() + static_cast<std::ptrdiff_t>(begin));
  std::copy(y.begin(), y.end(), ys_.begin() + static_cast<std::ptrdiff_t>(begin));
  std::copy(z.begin(), z.end(), zs_.begin() + static_cast<std::ptrdiff_t>(begin));
  std::copy(ids.begin(), ids.end(), ids_.begin() + static_cast<std::ptrdiff_t>(begin));

  // Left holds keys <= split, right holds keys >= split.
  const int left = build(begin, begin + mid);
  const int right = build(begin + mid, end);
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void KnnIndex::scan(std::size_t begin, std::size_t end, const Vec3& q, std::size_t k,
                    std::vector<Candidate>& heap, std::vector<double>& scratch) const {
  const std::size_t n = end - begin;
  scratch.resize(std::max(scratch.size(), n));
  simd::kernels().sq_dist(xs_.data() + begin, ys_.data() + begin, zs_.data() + begin, n, q.x, q.y, q.z,
                          scratch.data());
  for (std::size_t i = 0; i < n; ++i) offer(heap, k, {scratch[i], ids_[begin + i]});
}

void KnnIndex::search(int node_id, const Vec3& q, std::size_t k, std::vector<Candidate>& heap,
                      std::vector<double>& scratch) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.axis < 0) {
    scan(node.begin, node.end, q, k, heap, scratch);
    return;
  }
  const double coord = node.axis == 0 ? q.x : node.axis == 1 ? q.y : q.z;
  const double diff = coord - node.split;
  const int near = diff <= 0.0 ? node.left : node.right;
  const int far = diff <= 0.0 ? node.right : node.left;
  search(near, q, k, heap, scratch);
  // Equal distances must still be visited so lower ids can win ties.
  if (heap.size() < k || diff * diff <= heap.front().first) search(far, q, k, heap, scratch);
}

std::vector<std::size_t> KnnIndex::query(const Vec3& q, std::size_t k) const {
  if (k > size()) {
    throw DomainError("k = " + std::to_string(k) + " exceeds the point count " + std::to_string(size()));
  }
  std::vector<Candidate> heap;
  heap.reserve(k + 1);
  std::vector<double> scratch;
  if (k > 0) {
    if (method_ == Method::brute_force) {
      scan(0, size(), q, k, heap, scratch);
    } else {
      search(0, q, k, heap, scratch);
    }
  }
  std::sort_heap(heap.begin(), heap.end());
  std::vector<std::size_t> out(heap.size());
  std::transform(heap.begin(), heap.end(), out.begin(), [](const Candidate& c) { return c.second; });
  return out;
}

std::vector<std::size_t> KnnIndex::query_all(std::size_t k) const {
  if (k > size()) {
    throw DomainError("k = " + std::to_string(k) + " exceeds the point count " + std::to_string(size()));
  }
  std::vector<Vec3> by_id(size());
  for (std::size_t i = 0; i < size(); ++i) by_id[ids_[i]] = {xs_[i], ys_[i], zs_[i]};
  std::vector<std::size_t> out;
  out.reserve(size() * k);
  for (const auto& q : by_id) {
    const auto nn = query(q, k);
    out.insert(out.end(), nn.begin(), nn.end());
  }
  return out;
}

}  // namespace tpvd
