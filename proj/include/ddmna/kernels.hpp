#pragma once

// Data-parallel inner loops. Each kernel has a serial reference next to its
// OpenMP version; tests check that both agree exactly and bench/ compares them.

#include "ddmna/dataset.hpp"
#include "ddmna/nn_index.hpp"

#include <limits>
#include <span>
#include <vector>

namespace ddmna::kernels {

NearestResult nearest_scan_serial(std::span<const Pair> pairs, const Pair& query, double w);
NearestResult nearest_scan_parallel(std::span<const Pair> pairs, const Pair& query, double w);

/// One nearest-neighbour answer per query.
std::vector<NearestResult> nearest_batch_serial(std::span<const Pair> pairs, std::span<const Pair> queries, double w);
std::vector<NearestResult> nearest_batch_parallel(std::span<const Pair> pairs, std::span<const Pair> queries,
                                                  double w);
std::vector<NearestResult> nearest_batch_indexed(const NearestIndex& index, std::span<const Pair> queries, double w);

/// Minimum of f over [0, count); ties keep the smallest argument.
struct ArgMin {
  double value;
  std::size_t index;
};

template <class F>
ArgMin argmin_serial(std::size_t count, F&& f) {
  ArgMin best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t k = 0; k < count; ++k) {
    const double v = f(k);
    if (v < best.value) best = {v, k};
  }
  return best;
}

template <class F>
ArgMin argmin_parallel(std::size_t count, F&& f) {
  ArgMin best{std::numeric_limits<double>::infinity(), 0};
  const auto n = static_cast<long long>(count);
#pragma omp parallel
  {
    ArgMin local{std::numeric_limits<double>::infinity(), 0};
#pragma omp for schedule(static) nowait
    for (long long k = 0; k < n; ++k) {
      const double v = f(static_cast<std::size_t>(k));
      if (v < local.value) local = {v, static_cast<std::size_t>(k)};
    }
#pragma omp critical(ddmna_argmin)
    {
      if (local.value < best.value || (local.value == best.value && local.index < best.index)) best = local;
    }
  }
  return best;
}

} // namespace ddmna::kernels
