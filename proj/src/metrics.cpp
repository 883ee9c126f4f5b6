#include "ddmna/metrics.hpp"

#include "ddmna/dataset.hpp"
#include "ddmna/error.hpp"

#include <cmath>
#include <set>

namespace ddmna {

namespace {

void check_grids(const TransientTrace& a, const TransientTrace& b) {
  if (a.size() != b.size() || a.states.size() != a.size() || b.states.size() != b.size())
    throw DomainError("traces do not share a time grid");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a.times[k] - b.times[k]) > 1e-9 * std::max(1.0, std::abs(b.times[k])))
      throw DomainError("traces do not share a time grid");
}

double true_weight(const ErrorTarget& t, const Pair& ref) {
  return element_tangent(t.truth, t.tangent_weight ? ref.a : 0.0);
}

} // namespace

ErrorSeries energy_mismatch_error(const TransientTrace& trace, const TransientTrace& ref, const ErrorTarget& target) {
  check_grids(trace, ref);
  ErrorSeries out;
  out.times = ref.times;
  out.values.reserve(ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const Pair r = element_pair(ref.states[k], target.cls, target.column);
    const Pair p = element_pair(trace.states[k], target.cls, target.column);
    out.values.push_back(weighted_pair_distance(r, p, true_weight(target, r)));
  }
  return out;
}

double rms_error_in_frame(const TransientTrace& a, const TransientTrace& b, const TransientTrace& frame,
                          const ErrorTarget& target) {
  check_grids(a, frame);
  check_grids(b, frame);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const Pair f = element_pair(frame.states[k], target.cls, target.column);
    const double w = true_weight(target, f);
    num += weighted_pair_distance(element_pair(a.states[k], target.cls, target.column),
                                  element_pair(b.states[k], target.cls, target.column), w);
    den += weighted_pair_distance(f, {0.0, 0.0}, w);
  }
  if (!(den > 0.0)) throw DomainError("reference trace has zero norm");
  return std::sqrt(num / den);
}

double rms_error(const TransientTrace& trace, const TransientTrace& ref, const ErrorTarget& target) {
  return rms_error_in_frame(trace, ref, ref, target);
}

ErrorDecomposition decompose_error(const TransientTrace& dd, const TransientTrace& trad, const TransientTrace& ref,
                                   const ErrorTarget& target) {
  ErrorDecomposition e;
  e.total = rms_error(dd, ref, target);
  e.time = rms_error(trad, ref, target);
  // Measured in the reference frame so that all three are one weighted norm and the triangle inequality applies.
  e.data = rms_error_in_frame(dd, trad, ref, target);
  e.triangle_holds = e.total <= (e.time + e.data) * (1.0 + 1e-12);
  e.squared_holds = e.total * e.total <= (e.time * e.time + e.data * e.data) * (1.0 + 1e-12);
  return e;
}

double convergence_slope(std::span<const ConvergencePoint> points) {
  if (points.size() < 3) throw DomainError("convergence slope needs at least 3 points");
  std::set<double> distinct;
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    if (!(p.n > 0.0) || !(p.rms > 0.0)) throw DomainError("convergence points must be positive");
    distinct.insert(p.n);
    mx += std::log10(p.n);
    my += std::log10(p.rms);
  }
  if (distinct.size() < 3) throw DomainError("convergence slope needs 3 distinct N");
  const double n = static_cast<double>(points.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log10(p.n) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log10(p.rms) - my);
  }
  return sxy / sxx;
}

double relative_rms(std::span<const double> x, std::span<const double> ref) {
  if (x.size() != ref.size()) throw DomainError("series lengths differ");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    num += (x[k] - ref[k]) * (x[k] - ref[k]);
    den += ref[k] * ref[k];
  }
  if (!(den > 0.0)) throw DomainError("reference series has zero norm");
  return std::sqrt(num / den);
}

} // namespace ddmna
