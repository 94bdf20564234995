#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace vemreg {

// Exact nearest-neighbor tree over Dim-dimensional points, median split,
// flat node storage. Queries return squared distances; answers match
// exhaustive search exactly.
template <int Dim>
class KdTree {
 public:
  using Point = std::array<double, Dim>;

  KdTree() = default;

  explicit KdTree(std::vector<Point> points) : pts_(std::move(points)) {
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!pts_.empty()) {
      nodes_.reserve(2 * pts_.size() / kLeafSize + 4);
      build(0, static_cast<int>(pts_.size()));
    }
  }

  std::size_t size() const { return pts_.size(); }

  // Index of the nearest stored point and its squared distance.
  std::pair<int, double> nearest(const Point& query) const {
    Result res{-1, std::numeric_limits<double>::infinity()};
    if (!nodes_.empty()) search(0, query, res);
    return {res.index, res.dist2};
  }

  // Nearest point strictly different from index `exclude` (for spacing
  // statistics over the tree's own points).
  std::pair<int, double> nearest_excluding(const Point& query, int exclude) const {
    Result res{-1, std::numeric_limits<double>::infinity()};
    res.exclude = exclude;
    if (!nodes_.empty()) search(0, query, res);
    return {res.index, res.dist2};
  }

  // k nearest neighbors, ascending by squared distance.
  std::vector<std::pair<int, double>> knn(const Point& query, int k, int exclude = -1) const {
    KnnResult res;
    res.k = static_cast<std::size_t>(k);
    res.exclude = exclude;
    if (!nodes_.empty() && k > 0) search_knn(0, query, res);
    std::sort(res.heap.begin(), res.heap.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return res.heap;
  }

  const Point& point(int i) const { return pts_[static_cast<std::size_t>(i)]; }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    double split = 0;
    int axis = -1;    // -1 marks a leaf
    int left = -1;    // node index or range begin for leaves
    int right = -1;   // node index or range end for leaves
  };

  struct Result {
    int index;
    double dist2;
    int exclude = -1;
  };

  struct KnnResult {
    std::size_t k = 0;
    int exclude = -1;
    std::vector<std::pair<int, double>> heap;  // max-heap on squared distance

    double bound() const {
      return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.front().second;
    }
    void offer(int index, double d2) {
      static const auto cmp = [](const auto& a, const auto& b) { return a.second < b.second; };
      if (heap.size() < k) {
        heap.emplace_back(index, d2);
        std::push_heap(heap.begin(), heap.end(), cmp);
      } else if (d2 < heap.front().second) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        heap.back() = {index, d2};
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
    }
  };

  static double dist2(const Point& a, const Point& b) {
    double d = 0;
    for (int k = 0; k < Dim; ++k) {
      const double t = a[k] - b[k];
      d += t * t;
    }
    return d;
  }

  int build(int begin, int end) {
    const int node_index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize) {
      nodes_[node_index] = {0, -1, begin, end};
      return node_index;
    }
    // Split on the axis with the largest extent.
    Point lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (int i = begin; i < end; ++i) {
      const Point& p = pts_[order_[static_cast<std::size_t>(i)]];
      for (int k = 0; k < Dim; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
    int axis = 0;
    for (int k = 1; k < Dim; ++k) {
      if (hi[k] - lo[k] > hi[axis] - lo[axis]) axis = k;
    }
    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       return pts_[static_cast<std::size_t>(a)][axis] <
                              pts_[static_cast<std::size_t>(b)][axis];
                     });
    const double split = pts_[order_[static_cast<std::size_t>(mid)]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[node_index] = {split, axis, left, right};
    return node_index;
  }

  void search(int node_index, const Point& query, Result& res) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_index)];
    if (node.axis < 0) {
      for (int i = node.left; i < node.right; ++i) {
        const int idx = order_[static_cast<std::size_t>(i)];
        if (idx == res.exclude) continue;
        const double d = dist2(pts_[static_cast<std::size_t>(idx)], query);
        if (d < res.dist2) {
          res.dist2 = d;
          res.index = idx;
        }
      }
      return;
    }
    const double delta = query[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, query, res);
    if (delta * delta < res.dist2) search(far, query, res);
  }

  void search_knn(int node_index, const Point& query, KnnResult& res) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_index)];
    if (node.axis < 0) {
      for (int i = node.left; i < node.right; ++i) {
        const int idx = order_[static_cast<std::size_t>(i)];
        if (idx == res.exclude) continue;
        res.offer(idx, dist2(pts_[static_cast<std::size_t>(idx)], query));
      }
      return;
    }
    const double delta = query[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search_knn(near, query, res);
    if (delta * delta < res.bound()) search_knn(far, query, res);
  }

  std::vector<Point> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

}  // namespace vemreg
