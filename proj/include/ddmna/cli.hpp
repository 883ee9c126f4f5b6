#pragma once

#include "ddmna/config.hpp"
#include "ddmna/dataset.hpp"
#include "ddmna/dd_solver.hpp"
#include "ddmna/scenarios.hpp"
#include "ddmna/transient.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ddmna {

enum class SolverKind { Traditional, DataDriven };

/// Measurements for one element: read from `file`, or sampled from the element's netlist model.
struct DatasetSpec {
  std::string element;
  std::optional<std::string> file;
  SamplingPlan plan;
  bool explicit_range = false; // false: range from a traditional run, widened by `margin`
  double margin = 1.2;
};

struct RunConfig {
  std::string netlist;
  TransientConfig transient;
  SolverKind solver = SolverKind::Traditional;
  DDConfig dd;
  std::vector<DatasetSpec> datasets;
  std::string out_dir = "out";
  long seed = 0; // reserved

  /// Reads the [run], [transient], [dd] and [data.<element>] sections.
  static RunConfig from(const ConfigFile& cfg);
  /// Throws ConfigError with the offending key in the message.
  void validate() const;
};

struct ExperimentSpec {
  ScenarioKind scenario = ScenarioKind::RcLinear;
  std::vector<double> n;      // empty: scenario defaults
  std::vector<Scheme> schemes;
  std::vector<int> steps;     // empty: scenario default
  double margin = 1.2;
  DDConfig dd;
  std::string out_dir = "experiments";
  int jobs = 0;               // 0: OpenMP default

  /// Reads the [experiment] and [dd] sections.
  static ExperimentSpec from(const ConfigFile& cfg);
  void validate() const;
};

struct GenerateSpec {
  ElementModel model;
  PairKind kind = PairKind::G;
  SamplingPlan plan;
  std::string out = "-"; // "-" writes to stdout
};

/// Exit codes of the command-line tool.
enum ExitCode { kExitOk = 0, kExitSolver = 1, kExitUsage = 2 };

int cmd_run(const RunConfig& config, std::ostream& log);
int cmd_generate(const GenerateSpec& spec, std::ostream& log);
int cmd_experiment(const ExperimentSpec& spec, std::ostream& log);

/// Parses arguments and dispatches to a command.
int run_cli(int argc, char** argv);

std::string_view version_string();

} // namespace ddmna
