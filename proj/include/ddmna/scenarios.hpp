#pragma once

#include "ddmna/dataset.hpp"
#include "ddmna/dd_solver.hpp"
#include "ddmna/metrics.hpp"
#include "ddmna/netlist.hpp"
#include "ddmna/transient.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace ddmna {

enum class ScenarioKind { RcLinear, RcNonlinear, Rectifier };

ScenarioKind parse_scenario(std::string_view name);
std::string_view scenario_name(ScenarioKind kind);

/// How measurements are synthesised for one data-driven element.
struct DataElementPlan {
  std::string name;
  Spacing spacing = Spacing::Uniform;
  Drive drive = Drive::A;
};

/// A built-in experiment circuit. The netlist carries the true models.
struct Scenario {
  ScenarioKind kind = ScenarioKind::RcLinear;
  std::string netlist;
  std::vector<DataElementPlan> data_elements;
  std::string output_element; // element whose pair enters the error metrics
  std::string output_node;    // node whose potential is the output voltage
  double t_end = 5e-3;
  int steps = 1000;
  Scheme scheme = Scheme::Trapezoidal;
  std::vector<double> n_values;
  // Series RC constants for the analytic reference (rc-linear only).
  bool analytic = false;
  double r = 1e3, c = 1e-6, v = 1.0;
  // Window [0, nonlinear_until) reported separately in the error report; 0 disables it.
  double nonlinear_until = 0.0;
};

Scenario make_scenario(ScenarioKind kind);

struct CellSpec {
  Scheme scheme = Scheme::Trapezoidal;
  int steps = 1000;
  std::size_t n = 100; // total measurements, split evenly across data-driven elements
  double margin = 1.2;
  DDConfig dd;
};

struct CellResult {
  CellSpec spec;
  bool ok = false;
  std::string message;
  double rms = 0.0;       // data-driven vs reference at the output element
  double rms_time = 0.0;  // traditional vs reference
  double rms_data = 0.0;  // data-driven vs traditional
  double output_rel_rms = 0.0; // output node voltage against the traditional solver
  double median_iters = 0.0;
  double mean_iters = 0.0;
  double trad_mean_iters = 0.0;
  int nonconverged = 0;
  bool monotone = true;   // every energy-mismatch history non-increasing
  double max_kirchhoff = 0.0;
  double early_error = 0.0; // mean error before nonlinear_until
  double late_error = 0.0;  // mean error after it
  std::size_t measurements = 0;
  TransientTrace dd, trad, ref;
  ErrorSeries error;
};

/// Traditional reference run, data synthesis over its envelope, data-driven run and metrics.
CellResult run_cell(const Scenario& scenario, const CellSpec& spec);

/// Reference trace used by the metrics: analytic where available, else the traditional run.
TransientTrace reference_trace(const Scenario& scenario, const CircuitGraph& graph, const TransientTrace& trad);

/// Datasets per data-driven element covering the envelope of `trad`.
std::vector<MeasurementSet> synthesize_datasets(const Scenario& scenario, const CircuitGraph& graph,
                                                const TransientTrace& trad, std::size_t n, double margin);

/// Median over steps 1..K of the iteration counts.
double median_iterations(const TransientTrace& trace);

/// Largest em_p - em_{p-1} over all steps, relative to each step's first mismatch.
double worst_mismatch_increase(const TransientTrace& trace);

} // namespace ddmna
