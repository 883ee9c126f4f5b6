#pragma once

#include "ddmna/dataset.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace ddmna {

/// Static 2-d tree over the raw pair coordinates.
///
/// The weighted metric is diagonal, so axis-aligned cells stay valid for every
/// weight and the weight is a query-time argument. Candidate distances use
/// weighted_pair_distance itself and ties resolve to the lowest set index, so
/// results match nearest_measurement exactly.
class NearestIndex {
public:
  NearestIndex() = default;
  explicit NearestIndex(std::span<const Pair> pairs, std::size_t leaf_size = 16);
  explicit NearestIndex(const MeasurementSet& set, std::size_t leaf_size = 16)
      : NearestIndex(std::span<const Pair>(set.pairs), leaf_size) {}

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  NearestResult nearest(const Pair& query, double w) const;

  /// k nearest in ascending (distance, index) order.
  std::vector<NearestResult> k_nearest(const Pair& query, double w, std::size_t k) const;

private:
  struct Node {
    double a_min, a_max, b_min, b_max;
    std::size_t begin, end;      // range in points_
    std::size_t left = 0, right = 0; // children, 0 for a leaf
  };

  struct Entry {
    Pair p;
    std::size_t index;
  };

  std::size_t build(std::size_t begin, std::size_t end, std::size_t leaf_size);
  static double box_bound(const Node& n, const Pair& q, double w);

  std::vector<Entry> points_;
  std::vector<Node> nodes_;
};

} // namespace ddmna
