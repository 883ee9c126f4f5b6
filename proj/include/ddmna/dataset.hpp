#pragma once

#include "ddmna/elements.hpp"
#include "ddmna/netlist.hpp"
#include "ddmna/transient.hpp"

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ddmna {

/// Which constitutive relation a measurement set samples.
enum class PairKind { G, C, L };

PairKind pair_kind(BranchClass cls);

/// One measured state in canonical order: the weighted coordinate `a` first.
///   G: (v, i)    C: (v, q)    L: (i, psi)
/// The weight w multiplies a and 1/w multiplies b in the distance.
struct Pair {
  double a = 0.0;
  double b = 0.0;

  friend bool operator==(const Pair&, const Pair&) = default;
};

struct MeasurementSet {
  PairKind kind = PairKind::G;
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
  /// Throws DomainError when empty or non-finite.
  void validate() const;
};

/// Removes repeated pairs keeping first occurrences. Returns the number removed.
std::size_t remove_duplicates(MeasurementSet& set);

/// ArcLength spaces samples evenly along the curve in the weighted metric (needs the model).
enum class Spacing { Uniform, LogSymmetric, ArcLength };
enum class Drive { A, B }; // grid the weighted coordinate (v for G/C, i for L) or the other one

struct SamplingPlan {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 1;
  Spacing spacing = Spacing::Uniform;
  Drive drive = Drive::A;
  /// Width of the linear core of the log-symmetric map; 0 picks 1e-6 * max(|lo|, |hi|).
  double log_core = 0.0;
  /// Metric weight for arc-length spacing; 0 picks the chord slope between the range ends.
  double arc_weight = 0.0;

  void validate() const;
};

/// Grid points of a plan (count == 1 gives the midpoint). Arc-length plans need generate_measurements.
std::vector<double> sample_grid(const SamplingPlan& plan);

/// Noise-free samples of a model on a plan grid.
MeasurementSet generate_measurements(const ElementModel& model, PairKind kind, const SamplingPlan& plan);

/// Inverse of the model relation: drive value that produces dependent value `b`.
double invert_element(const ElementModel& model, double b);

struct ElementWeight {
  enum class Rule { Constant, LocalTangent };
  double value = 1.0;
  Rule rule = Rule::Constant;
};

/// 1/2 w (da)^2 + 1/2 w^-1 (db)^2.
inline double weighted_pair_distance(const Pair& p, const Pair& q, double w) {
  const double da = p.a - q.a;
  const double db = p.b - q.b;
  return 0.5 * w * da * da + 0.5 / w * db * db;
}

struct NearestResult {
  std::size_t index = 0;
  Pair pair;
  double distance = 0.0;
};

/// Brute-force scan; ties resolve to the lowest index.
NearestResult nearest_measurement(const MeasurementSet& set, const Pair& query, double w);

/// Global chord slope (b_max - b_min) / (a_max - a_min); the constant-weight default.
double chord_weight(const MeasurementSet& set);

struct TangentEstimate {
  double value = 0.0;
  bool degenerate = false; // neighbourhood had no spread in a; value is the previous weight
  bool clamped = false;
};

class NearestIndex;

/// Least-squares slope through the k nearest pairs of `state` under weight `w_current`,
/// clamped to [w_min, w_max]. The index, when given, must be built from `set`.
TangentEstimate local_tangent_weight(const MeasurementSet& set, const Pair& state, std::size_t k, double w_current,
                                     double w_min, double w_max, const NearestIndex* index = nullptr);

/// Closest point on b = w a under the metric with weight w.
Pair project_known_linear(double w, const Pair& query);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Widens [lo, hi] about its midpoint by `margin`; a zero-width range grows by (margin-1)|mid|.
Range widen(Range r, double margin);

/// Range of both pair coordinates of every passive element over a trace.
struct Envelope {
  std::vector<Range> g_a, g_b, c_a, c_b, l_a, l_b;
};

/// Per element min/max across the trace, widened by `margin` (>= 1).
Envelope operating_envelope(const CircuitGraph& graph, const TransientTrace& trace, double margin);

/// Canonical pair of an element in a state.
Pair element_pair(const CircuitState& s, BranchClass cls, std::size_t column);
void set_element_pair(CircuitState& s, BranchClass cls, std::size_t column, const Pair& p);

/// CSV with header v,i | v,q | psi,i. Duplicates are dropped; `duplicates` receives the count.
MeasurementSet read_measurements_csv(std::istream& in, std::size_t* duplicates = nullptr);
MeasurementSet read_measurements_file(const std::string& path, std::size_t* duplicates = nullptr);
void write_measurements_csv(std::ostream& out, const MeasurementSet& set);

} // namespace ddmna
