#pragma once

#include "ddmna/elements.hpp"
#include "ddmna/netlist.hpp"
#include "ddmna/transient.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace ddmna {

/// Element whose error is measured, with the model taken as ground truth.
struct ErrorTarget {
  BranchClass cls = BranchClass::C;
  std::size_t column = 0;
  ElementModel truth = LinearModel{LinearKind::Capacitance, 1.0};
  /// Use the true model's tangent at each reference state; otherwise its tangent at the origin.
  bool tangent_weight = true;
};

struct ErrorSeries {
  std::vector<double> times;
  std::vector<double> values; // weighted squared distance per step
};

/// Per step weighted distance between the element pairs of `trace` and `ref`.
ErrorSeries energy_mismatch_error(const TransientTrace& trace, const TransientTrace& ref, const ErrorTarget& target);

/// sqrt(sum of errors / sum of squared reference norms).
double rms_error(const TransientTrace& trace, const TransientTrace& ref, const ErrorTarget& target);

/// Like rms_error(a, b) but with weights and normalisation taken from `frame`.
double rms_error_in_frame(const TransientTrace& a, const TransientTrace& b, const TransientTrace& frame,
                          const ErrorTarget& target);

struct ErrorDecomposition {
  double total = 0.0; // data-driven vs reference
  double time = 0.0;  // traditional vs reference
  double data = 0.0;  // data-driven vs traditional
  bool triangle_holds = false; // total <= time + data
  bool squared_holds = false;  // total^2 <= time^2 + data^2, as the inequality is often written
};

ErrorDecomposition decompose_error(const TransientTrace& dd, const TransientTrace& trad, const TransientTrace& ref,
                                   const ErrorTarget& target);

struct ConvergencePoint {
  double n = 0.0;
  double rms = 0.0;
};

/// Least-squares slope of log10(rms) against log10(n).
double convergence_slope(std::span<const ConvergencePoint> points);

/// sqrt(sum (x - x_ref)^2 / sum x_ref^2).
double relative_rms(std::span<const double> x, std::span<const double> ref);

} // namespace ddmna
