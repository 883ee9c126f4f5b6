#include "ddmna/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace ddmna {

namespace {

// Relative slack for pruning; cells are only skipped when provably worse.
constexpr double kPruneSlack = 1e-12;

bool better(double d, std::size_t i, double best_d, std::size_t best_i) {
  return d < best_d || (d == best_d && i < best_i);
}

} // namespace

NearestIndex::NearestIndex(std::span<const Pair> pairs, std::size_t leaf_size) {
  points_.reserve(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) points_.push_back({pairs[k], k});
  if (points_.empty()) return;
  nodes_.reserve(2 * pairs.size() / std::max<std::size_t>(leaf_size, 1) + 2);
  build(0, points_.size(), std::max<std::size_t>(leaf_size, 1));
}

std::size_t NearestIndex::build(std::size_t begin, std::size_t end, std::size_t leaf_size) {
  Node node{};
  node.begin = begin;
  node.end = end;
  node.a_min = node.b_min = std::numeric_limits<double>::infinity();
  node.a_max = node.b_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = begin; k < end; ++k) {
    node.a_min = std::min(node.a_min, points_[k].p.a);
    node.a_max = std::max(node.a_max, points_[k].p.a);
    node.b_min = std::min(node.b_min, points_[k].p.b);
    node.b_max = std::max(node.b_max, points_[k].p.b);
  }
  const std::size_t id = nodes_.size();
  nodes_.push_back(node);
  if (end - begin <= leaf_size) return id;

  // Split along the coordinate with the larger spread relative to the root cell,
  // which keeps cells balanced whatever the units of a and b.
  const Node& root = nodes_.front();
  const double ra = std::max(root.a_max - root.a_min, std::numeric_limits<double>::min());
  const double rb = std::max(root.b_max - root.b_min, std::numeric_limits<double>::min());
  const bool split_a = (node.a_max - node.a_min) / ra >= (node.b_max - node.b_min) / rb;
  if ((node.a_max - node.a_min) == 0.0 && (node.b_max - node.b_min) == 0.0) return id;

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(points_.begin() + static_cast<std::ptrdiff_t>(begin), points_.begin() + static_cast<std::ptrdiff_t>(mid),
                   points_.begin() + static_cast<std::ptrdiff_t>(end), [split_a](const Entry& x, const Entry& y) {
                     return split_a ? x.p.a < y.p.a : x.p.b < y.p.b;
                   });
  const std::size_t left = build(begin, mid, leaf_size);
  const std::size_t right = build(mid, end, leaf_size);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double NearestIndex::box_bound(const Node& n, const Pair& q, double w) {
  const double da = q.a < n.a_min ? n.a_min - q.a : (q.a > n.a_max ? q.a - n.a_max : 0.0);
  const double db = q.b < n.b_min ? n.b_min - q.b : (q.b > n.b_max ? q.b - n.b_max : 0.0);
  return 0.5 * w * da * da + 0.5 / w * db * db;
}

NearestResult NearestIndex::nearest(const Pair& query, double w) const {
  NearestResult best{std::numeric_limits<std::size_t>::max(), {}, std::numeric_limits<double>::infinity()};
  if (nodes_.empty()) return best;

  // Iterative depth-first descent, nearer child first.
  std::vector<std::pair<std::size_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0, box_bound(nodes_[0], query, w));
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > best.distance * (1.0 + kPruneSlack)) continue;
    const Node& n = nodes_[id];
    if (n.left == 0) {
      for (std::size_t k = n.begin; k < n.end; ++k) {
        const double d = weighted_pair_distance(points_[k].p, query, w);
        if (better(d, points_[k].index, best.distance, best.index)) best = {points_[k].index, points_[k].p, d};
      }
      continue;
    }
    const double bl = box_bound(nodes_[n.left], query, w);
    const double br = box_bound(nodes_[n.right], query, w);
    if (bl <= br) {
      stack.emplace_back(n.right, br);
      stack.emplace_back(n.left, bl);
    } else {
      stack.emplace_back(n.left, bl);
      stack.emplace_back(n.right, br);
    }
  }
  return best;
}

std::vector<NearestResult> NearestIndex::k_nearest(const Pair& query, double w, std::size_t k) const {
  k = std::min(k, points_.size());
  if (k == 0) return {};
  auto worse = [](const NearestResult& x, const NearestResult& y) {
    return x.distance < y.distance || (x.distance == y.distance && x.index < y.index);
  };
  // Max-heap on (distance, index): top is the current worst of the k kept.
  std::priority_queue<NearestResult, std::vector<NearestResult>, decltype(worse)> heap(worse);

  std::vector<std::pair<std::size_t, double>> stack;
  stack.emplace_back(0, box_bound(nodes_[0], query, w));
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (heap.size() == k && bound > heap.top().distance * (1.0 + kPruneSlack)) continue;
    const Node& n = nodes_[id];
    if (n.left == 0) {
      for (std::size_t j = n.begin; j < n.end; ++j) {
        const double d = weighted_pair_distance(points_[j].p, query, w);
        if (heap.size() < k) {
          heap.push({points_[j].index, points_[j].p, d});
        } else if (better(d, points_[j].index, heap.top().distance, heap.top().index)) {
          heap.pop();
          heap.push({points_[j].index, points_[j].p, d});
        }
      }
      continue;
    }
    const double bl = box_bound(nodes_[n.left], query, w);
    const double br = box_bound(nodes_[n.right], query, w);
    if (bl <= br) {
      stack.emplace_back(n.right, br);
      stack.emplace_back(n.left, bl);
    } else {
      stack.emplace_back(n.left, bl);
      stack.emplace_back(n.right, br);
    }
  }
  std::vector<NearestResult> out(heap.size());
  for (std::size_t j = out.size(); j-- > 0;) {
    out[j] = heap.top();
    heap.pop();
  }
  return out;
}

} // namespace ddmna
