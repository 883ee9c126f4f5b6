#include "ddmna/kernels.hpp"

namespace ddmna::kernels {

NearestResult nearest_scan_serial(std::span<const Pair> pairs, const Pair& query, double w) {
  const auto best = argmin_serial(pairs.size(), [&](std::size_t k) { return weighted_pair_distance(pairs[k], query, w); });
  return {best.index, pairs[best.index], best.value};
}

NearestResult nearest_scan_parallel(std::span<const Pair> pairs, const Pair& query, double w) {
  const auto best =
      argmin_parallel(pairs.size(), [&](std::size_t k) { return weighted_pair_distance(pairs[k], query, w); });
  return {best.index, pairs[best.index], best.value};
}

std::vector<NearestResult> nearest_batch_serial(std::span<const Pair> pairs, std::span<const Pair> queries, double w) {
  std::vector<NearestResult> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) out[q] = nearest_scan_serial(pairs, queries[q], w);
  return out;
}

std::vector<NearestResult> nearest_batch_parallel(std::span<const Pair> pairs, std::span<const Pair> queries,
                                                  double w) {
  std::vector<NearestResult> out(queries.size());
  const auto n = static_cast<long long>(queries.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long long q = 0; q < n; ++q) out[q] = nearest_scan_serial(pairs, queries[q], w);
  return out;
}

std::vector<NearestResult> nearest_batch_indexed(const NearestIndex& index, std::span<const Pair> queries, double w) {
  std::vector<NearestResult> out(queries.size());
  const auto n = static_cast<long long>(queries.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (long long q = 0; q < n; ++q) out[q] = index.nearest(queries[q], w);
  return out;
}

} // namespace ddmna::kernels
