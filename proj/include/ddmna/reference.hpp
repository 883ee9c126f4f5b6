#pragma once

#include "ddmna/bindings.hpp"
#include "ddmna/netlist.hpp"
#include "ddmna/transient.hpp"

#include <Eigen/Dense>

namespace ddmna {

/// Unknown layout of the model-based system: (phi, i_L, i_V).
struct TraditionalLayout {
  Eigen::Index n_phi = 0, n_l = 0, n_v = 0;

  Eigen::Index phi() const { return 0; }
  Eigen::Index i_l() const { return n_phi; }
  Eigen::Index i_v() const { return n_phi + n_l; }
  Eigen::Index size() const { return n_phi + n_l + n_v; }
};

/// Newton-linearised MNA step: matrix * x_next = rhs.
struct TraditionalSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  Eigen::VectorXd residual; // F(x) at the linearisation point
  TraditionalLayout layout;
};

struct NewtonOptions {
  double rel_tol = 1e-12;
  int max_iters = 100;
  int max_halvings = 8;
};

class TraditionalSolver {
public:
  /// Every passive element must be bound to a model.
  TraditionalSolver(const CircuitGraph& graph, const CircuitBindings& bindings, NewtonOptions options = {});

  const TraditionalLayout& layout() const { return layout_; }
  const IncidenceSet& incidence() const { return inc_; }

  /// Linearisation of the step equations around unknown vector x.
  TraditionalSystem assemble(const Eigen::VectorXd& x, const HistoryState& history, const StepRule& rule,
                             double t_next) const;

  /// Full state from an unknown vector (element voltages, currents, charges, fluxes).
  CircuitState expand(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pack(const CircuitState& s) const;

  struct StepResult {
    CircuitState state;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<double> residual_history;
  };

  /// Damped Newton for one implicit step. Throws SolverError after max_iters.
  StepResult solve_step(const HistoryState& history, const StepRule& rule, double t_next,
                        const CircuitState& guess) const;

  /// Initial state at t0 from the initial charges and fluxes.
  CircuitState initial_state(const TransientConfig& config) const;

  TransientTrace run(const TransientConfig& config) const;

private:
  struct Eval {
    Eigen::VectorXd f;
    Eigen::VectorXd scale;
  };
  StepResult newton(const HistoryState& history, const StepRule& rule, double t_next, const CircuitState& guess,
                    bool damped) const;
  Eval residual(const Eigen::VectorXd& x, const HistoryState& history, const StepRule& rule, double t_next) const;

  const CircuitGraph& graph_;
  IncidenceSet inc_;
  std::vector<ElementModel> g_, c_;
  Eigen::VectorXd l_;
  TraditionalLayout layout_;
  NewtonOptions options_;
};

/// max |r| over the largest row scale of one equation block; the Newton stopping measure.
double relative_residual(const Eigen::VectorXd& r, const Eigen::VectorXd& scale);

TransientTrace run_transient_traditional(const CircuitGraph& graph, const CircuitBindings& bindings,
                                         const TransientConfig& config, NewtonOptions options = {});

/// Capacitor voltage of a series RC charged from zero by a DC step V.
double analytic_rc_voltage(double r, double c, double v, double t);

} // namespace ddmna
