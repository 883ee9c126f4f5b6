#pragma once

#include "ddmna/netlist.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ddmna {

enum class Scheme { BackwardEuler, Trapezoidal };

Scheme parse_scheme(std::string_view text);
std::string_view scheme_name(Scheme s);

struct TransientConfig {
  Scheme scheme = Scheme::Trapezoidal;
  double t0 = 0.0;
  double t_end = 5e-3;
  int steps = 1000;
  // Empty vectors mean zero initial charge / flux.
  Eigen::VectorXd q0;
  Eigen::VectorXd psi0;

  double step_size() const { return (t_end - t0) / steps; }
  void validate() const;
};

/// Companion coefficients of one implicit step: x_dot^{n+1} = alpha * x^{n+1} - history(x).
struct StepRule {
  Scheme scheme = Scheme::BackwardEuler;
  double h = 1.0;

  double alpha() const { return scheme == Scheme::BackwardEuler ? 1.0 / h : 2.0 / h; }
};

struct HistoryState {
  Eigen::VectorXd q;       // charge per capacitor at t_n
  Eigen::VectorXd psi;     // flux per inductor at t_n
  Eigen::VectorXd q_dot;   // trapezoidal only
  Eigen::VectorXd psi_dot; // trapezoidal only

  static HistoryState zero(const CircuitGraph& graph);

  /// Right-hand side terms alpha*x^n (+ x_dot^n for the trapezoidal rule).
  Eigen::VectorXd q_term(const StepRule& rule) const;
  Eigen::VectorXd psi_term(const StepRule& rule) const;
};

/// Full circuit state at one instant. Pairs per element follow the branch-class order of the graph.
struct CircuitState {
  Eigen::VectorXd phi;
  Eigen::VectorXd v_g, i_g;
  Eigen::VectorXd v_c, q_c;
  Eigen::VectorXd v_l, i_l, psi_l;
  Eigen::VectorXd i_v;

  static CircuitState zero(const CircuitGraph& graph);
};

/// Advances history with an accepted state.
HistoryState advance_history(const HistoryState& prev, const CircuitState& accepted, const StepRule& rule);

struct StepDiagnostics {
  int iterations = 0;
  bool converged = true;
  double final_value = 0.0;          // energy mismatch (data-driven) or residual (Newton)
  std::vector<double> history;       // per-iteration mismatch or residual
  std::vector<std::vector<int>> selections; // data-driven: chosen index per element per iteration
  double kirchhoff = 0.0; // relative Kirchhoff residual of the accepted state
  int moves = 0;          // data-driven: accepted neighbour moves
};

struct TransientTrace {
  std::vector<double> times;
  std::vector<CircuitState> states;       // accepted states (K-feasible for the data-driven solver)
  std::vector<CircuitState> data_states;  // data-driven only: projected data state per step
  std::vector<StepDiagnostics> diagnostics; // index 0 belongs to the initial condition

  std::size_t size() const { return times.size(); }
};

/// Header: t, node potentials, then per element v,i | v,q | v,psi,i, then source currents.
void write_trace_csv(std::ostream& out, const CircuitGraph& graph, const TransientTrace& trace);
/// Per step diagnostics; with `expected`, also an output column compared against it.
void write_summary_csv(std::ostream& out, const TransientTrace& trace, std::span<const double> output = {},
                       std::span<const double> expected = {});
void write_convergence_csv(std::ostream& out, const TransientTrace& trace);

/// Relative residuals of the discrete Kirchhoff equations for a state accepted at t_{n+1}.
struct KirchhoffResidual {
  double kcl = 0.0;
  double voltage = 0.0;  // v_X - A_X^T phi for G, C, L
  double inductor = 0.0; // A_L^T phi - psi_dot
  double source = 0.0;   // A_V^T phi - v_src
  double max() const;
};

KirchhoffResidual kirchhoff_residual(const CircuitGraph& graph, const IncidenceSet& inc, const CircuitState& s,
                                     const HistoryState& history, const StepRule& rule, double t);

Eigen::VectorXd source_voltages(const CircuitGraph& graph, double t);
Eigen::VectorXd source_currents(const CircuitGraph& graph, double t);

} // namespace ddmna
