#pragma once

#include "ddmna/bindings.hpp"
#include "ddmna/dataset.hpp"
#include "ddmna/netlist.hpp"
#include "ddmna/transient.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

namespace ddmna {

struct DDConfig {
  double tol_em = 1e-10;
  int max_iters = 500;
  ElementWeight::Rule weight_rule = ElementWeight::Rule::Constant;
  std::size_t tangent_k = 10;
  double w_min_factor = 1e-9;
  double w_max_factor = 1e9;
  std::size_t virtual_count = 10000; // samples per known nonlinear element
  double virtual_margin = 1.2;
  // Fold known linear elements into the Kirchhoff projection instead of alternating on them.
  bool eliminate_known = true;
  // First step starts from the initial condition (capacitor and inductor pairs held) instead of the zero pair.
  bool initial_seed = true;
  // After the alternation settles, try neighbouring measurements along each curve and keep improving moves.
  bool neighbor_search = true;

  void validate() const;
};

/// Metric coefficients per passive element, in branch-class column order.
struct WeightSet {
  Eigen::VectorXd g, c, l;

  double& at(BranchClass cls, std::size_t column);
  double at(BranchClass cls, std::size_t column) const;
  WeightSet scaled(double factor) const;
  void validate() const;
};

/// Constant-weight defaults: model coefficient for known elements, chord slope for data.
WeightSet default_weights(const CircuitGraph& graph, const CircuitBindings& bindings);

/// Sum of weighted pair distances over all passive elements.
double energy_mismatch(const CircuitGraph& graph, const CircuitState& a, const CircuitState& b, const WeightSet& w);

/// Unknown layout (phi, i_G, q_C, i_L, psi_L, i_V, eta, lambda_L, lambda_V).
struct ProjectionLayout {
  Eigen::Index n_phi = 0, n_g = 0, n_c = 0, n_l = 0, n_v = 0;

  static ProjectionLayout of(const IncidenceSet& inc);
  Eigen::Index phi() const { return 0; }
  Eigen::Index i_g() const { return n_phi; }
  Eigen::Index q_c() const { return i_g() + n_g; }
  Eigen::Index i_l() const { return q_c() + n_c; }
  Eigen::Index psi_l() const { return i_l() + n_l; }
  Eigen::Index i_v() const { return psi_l() + n_l; }
  Eigen::Index eta() const { return i_v() + n_v; }
  Eigen::Index lambda_l() const { return eta() + n_phi; }
  Eigen::Index lambda_v() const { return lambda_l() + n_l; }
  Eigen::Index size() const { return lambda_v() + n_v; }
};

/// Known linear elements folded into the projection: slope per element, NaN where the element keeps its target.
struct ModelLines {
  Eigen::VectorXd g, c, l;

  static ModelLines none(const IncidenceSet& inc);
  double slope(BranchClass cls, std::size_t column) const;
};

struct ProjectionSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  ProjectionLayout layout;
};

/// Stationarity system of the weighted distance to `target` subject to the discrete Kirchhoff laws.
ProjectionSystem assemble_projection_system(const IncidenceSet& inc, const WeightSet& w, const CircuitState& target,
                                            const HistoryState& history, const Eigen::VectorXd& v_src,
                                            const Eigen::VectorXd& i_src, const StepRule& rule,
                                            const ModelLines* lines = nullptr);

/// Factorised projection onto the Kirchhoff set for one weight set and step rule.
class KirchhoffProjector {
public:
  /// With `lines`, each listed element contributes its weighted distance to its model line instead of to a target.
  KirchhoffProjector(const IncidenceSet& inc, const WeightSet& w, const StepRule& rule,
                     std::optional<ModelLines> lines = std::nullopt);

  const ProjectionLayout& layout() const { return layout_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

  Eigen::VectorXd rhs(const CircuitState& target, const HistoryState& history, const Eigen::VectorXd& v_src,
                      const Eigen::VectorXd& i_src) const;
  /// Full solution vector including multipliers.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Closest Kirchhoff-feasible state; element voltages are recomputed from phi.
  CircuitState project(const CircuitState& target, const HistoryState& history, const Eigen::VectorXd& v_src,
                       const Eigen::VectorXd& i_src) const;
  CircuitState unpack(const Eigen::VectorXd& x) const;

private:
  const IncidenceSet* inc_;
  WeightSet w_;
  StepRule rule_;
  std::optional<ModelLines> lines_;
  ProjectionLayout layout_;
  Eigen::MatrixXd matrix_;
  // Equilibrated factorisation: matrix = row_scale^-1 * scaled * col_scale^-1.
  Eigen::VectorXd row_scale_, col_scale_;
  Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

CircuitState project_to_kirchhoff(const IncidenceSet& inc, const CircuitState& target, const WeightSet& w,
                                  const HistoryState& history, const Eigen::VectorXd& v_src,
                                  const Eigen::VectorXd& i_src, const StepRule& rule);

/// Per step record of the fixed-point loop.
struct DDStepResult {
  CircuitState state; // Kirchhoff-feasible
  CircuitState data;  // closest data state
  StepDiagnostics trace;
};

/// Data-driven transient solver: alternating projections between the Kirchhoff set and the data.
class DataDrivenSolver {
public:
  DataDrivenSolver(const CircuitGraph& graph, const CircuitBindings& bindings, DDConfig config = {},
                   std::optional<WeightSet> weights = std::nullopt);

  const CircuitGraph& graph() const { return graph_; }
  const WeightSet& weights() const { return weights_; }
  const IncidenceSet& incidence() const { return inc_; }
  const DDConfig& config() const { return config_; }

  /// Per element closest data or model point. `selections` receives the data index or -1 for known elements.
  CircuitState project_to_data(const CircuitState& feasible, const WeightSet& w,
                               std::vector<int>* selections = nullptr) const;

  /// Data state with every element at its point nearest the zero pair.
  CircuitState seed_state() const;

  struct InitialCondition {
    CircuitState state; // Kirchhoff-feasible at t0
    CircuitState data;  // start of the first step
    HistoryState history;
    int iterations = 0;
  };
  /// Consistent state at t0: capacitor and inductor pairs are held at the initial charges and fluxes
  /// while the remaining elements settle on their data.
  InitialCondition initial_condition(const TransientConfig& config) const;

  /// Data state made of one chosen measurement per data-driven element (known elements at the origin).
  CircuitState data_state(const std::vector<std::size_t>& selection) const;

  /// Per data-driven element: its branch class and column, in G, C, L order.
  std::vector<std::pair<BranchClass, std::size_t>> data_elements() const;
  const MeasurementSet& dataset(BranchClass cls, std::size_t column) const;

  DDStepResult solve_step(const CircuitState& start, const HistoryState& history, const StepRule& rule,
                          double t_next) const;

  TransientTrace run(const TransientConfig& config) const;

private:
  struct Slot {
    BranchClass cls = BranchClass::G;
    std::size_t column = 0;
    bool linear = false;     // known linear model
    double coefficient = 0.0;
    ElementModel model;      // known elements
    std::shared_ptr<const MeasurementSet> set; // data or virtual samples
    std::shared_ptr<const NearestIndex> index;
    bool data_driven = false;
    double w_ref = 1.0;
    // Measurement indices sorted along the curve, and the inverse permutation.
    std::shared_ptr<const std::vector<std::size_t>> order, rank;
  };

  WeightSet tangent_weights(const CircuitState& data, const WeightSet& current) const;
  std::optional<ModelLines> model_lines() const;

  const CircuitGraph& graph_;
  IncidenceSet inc_;
  DDConfig config_;
  std::vector<Slot> slots_;
  WeightSet weights_;
};

TransientTrace run_transient_dd(const CircuitGraph& graph, const CircuitBindings& bindings,
                                const TransientConfig& config, const DDConfig& dd = {},
                                std::optional<WeightSet> weights = std::nullopt);

/// Exhaustive search over every combination of measurements of the data-driven elements.
struct BruteForceResult {
  CircuitState state; // projection of the best tuple onto the Kirchhoff set
  CircuitState data;
  std::vector<std::size_t> selection;
  double minimum = 0.0;
  std::size_t candidates = 0;
};

/// Every passive element must be data-driven. Throws ConfigError when the tuple count exceeds `cap`.
BruteForceResult brute_force_timestep(const DataDrivenSolver& solver, const HistoryState& history,
                                      const StepRule& rule, double t_next, std::size_t cap = 1000000,
                                      bool parallel = true);

} // namespace ddmna
