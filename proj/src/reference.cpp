#include "ddmna/reference.hpp"

#include "ddmna/error.hpp"

#include <cmath>
#include <sstream>

namespace ddmna {

double relative_residual(const Eigen::VectorXd& r, const Eigen::VectorXd& scale) {
  if (r.size() == 0) return 0.0;
  return r.lpNorm<Eigen::Infinity>() / (scale.lpNorm<Eigen::Infinity>() + 1e-300);
}

TraditionalSolver::TraditionalSolver(const CircuitGraph& graph, const CircuitBindings& bindings, NewtonOptions options)
    : graph_(graph), inc_(build_incidence(graph)), options_(options) {
  if (!bindings.all_known()) throw ConfigError("traditional solver needs a model for every element");
  for (const auto& b : bindings.g) g_.push_back(b.model());
  for (const auto& b : bindings.c) c_.push_back(b.model());
  l_.resize(static_cast<Eigen::Index>(bindings.l.size()));
  for (std::size_t j = 0; j < bindings.l.size(); ++j) {
    const auto* lin = std::get_if<LinearModel>(&bindings.l[j].model());
    if (!lin) throw ConfigError("inductors must be linear");
    l_(static_cast<Eigen::Index>(j)) = lin->value;
  }
  layout_ = {static_cast<Eigen::Index>(graph.nodes.size()), static_cast<Eigen::Index>(graph.n_l()),
             static_cast<Eigen::Index>(graph.n_v())};
}

TraditionalSolver::Eval TraditionalSolver::residual(const Eigen::VectorXd& x, const HistoryState& history,
                                                    const StepRule& rule, double t_next) const {
  const auto& L = layout_;
  const Eigen::VectorXd phi = x.segment(L.phi(), L.n_phi);
  const Eigen::VectorXd i_l = x.segment(L.i_l(), L.n_l);
  const Eigen::VectorXd i_v = x.segment(L.i_v(), L.n_v);
  const double alpha = rule.alpha();

  const Eigen::VectorXd v_g = inc_.a_g.transpose() * phi;
  const Eigen::VectorXd v_c = inc_.a_c.transpose() * phi;
  Eigen::VectorXd i_g(v_g.size()), q(v_c.size());
  for (Eigen::Index j = 0; j < v_g.size(); ++j) i_g(j) = eval_element(g_[static_cast<std::size_t>(j)], v_g(j));
  for (Eigen::Index j = 0; j < v_c.size(); ++j) q(j) = eval_element(c_[static_cast<std::size_t>(j)], v_c(j));
  const Eigen::VectorXd q_hist = history.q_term(rule);
  const Eigen::VectorXd psi_hist = history.psi_term(rule);
  const Eigen::VectorXd i_src = source_currents(graph_, t_next);
  const Eigen::VectorXd v_src = source_voltages(graph_, t_next);

  Eval e;
  e.f.resize(L.size());
  e.scale.resize(L.size());
  e.f.segment(0, L.n_phi) =
      inc_.a_g * i_g + inc_.a_c * (alpha * q - q_hist) + inc_.a_l * i_l + inc_.a_v * i_v - inc_.a_i * i_src;
  e.scale.segment(0, L.n_phi) = inc_.a_g.cwiseAbs() * i_g.cwiseAbs() +
                                inc_.a_c.cwiseAbs() * ((alpha * q).cwiseAbs() + q_hist.cwiseAbs()) +
                                inc_.a_l.cwiseAbs() * i_l.cwiseAbs() + inc_.a_v.cwiseAbs() * i_v.cwiseAbs() +
                                inc_.a_i.cwiseAbs() * i_src.cwiseAbs();
  const Eigen::VectorXd flux = alpha * l_.cwiseProduct(i_l);
  e.f.segment(L.i_l(), L.n_l) = inc_.a_l.transpose() * phi - (flux - psi_hist);
  e.scale.segment(L.i_l(), L.n_l) =
      inc_.a_l.cwiseAbs().transpose() * phi.cwiseAbs() + flux.cwiseAbs() + psi_hist.cwiseAbs();
  e.f.segment(L.i_v(), L.n_v) = inc_.a_v.transpose() * phi - v_src;
  e.scale.segment(L.i_v(), L.n_v) = inc_.a_v.cwiseAbs().transpose() * phi.cwiseAbs() + v_src.cwiseAbs();
  return e;
}

TraditionalSystem TraditionalSolver::assemble(const Eigen::VectorXd& x, const HistoryState& history,
                                              const StepRule& rule, double t_next) const {
  const auto& L = layout_;
  const Eigen::VectorXd phi = x.segment(L.phi(), L.n_phi);
  const Eigen::VectorXd v_g = inc_.a_g.transpose() * phi;
  const Eigen::VectorXd v_c = inc_.a_c.transpose() * phi;
  Eigen::VectorXd dg(v_g.size()), dc(v_c.size());
  for (Eigen::Index j = 0; j < v_g.size(); ++j) dg(j) = element_tangent(g_[static_cast<std::size_t>(j)], v_g(j));
  for (Eigen::Index j = 0; j < v_c.size(); ++j) dc(j) = element_tangent(c_[static_cast<std::size_t>(j)], v_c(j));
  const double alpha = rule.alpha();

  TraditionalSystem sys;
  sys.layout = L;
  sys.matrix = Eigen::MatrixXd::Zero(L.size(), L.size());
  sys.matrix.block(0, 0, L.n_phi, L.n_phi) =
      inc_.a_g * dg.asDiagonal() * inc_.a_g.transpose() + alpha * inc_.a_c * dc.asDiagonal() * inc_.a_c.transpose();
  sys.matrix.block(0, L.i_l(), L.n_phi, L.n_l) = inc_.a_l;
  sys.matrix.block(0, L.i_v(), L.n_phi, L.n_v) = inc_.a_v;
  sys.matrix.block(L.i_l(), 0, L.n_l, L.n_phi) = inc_.a_l.transpose();
  sys.matrix.block(L.i_l(), L.i_l(), L.n_l, L.n_l) = Eigen::MatrixXd(-alpha * l_.asDiagonal());
  sys.matrix.block(L.i_v(), 0, L.n_v, L.n_phi) = inc_.a_v.transpose();

  sys.residual = residual(x, history, rule, t_next).f;
  sys.rhs = sys.matrix * x - sys.residual;
  return sys;
}

CircuitState TraditionalSolver::expand(const Eigen::VectorXd& x) const {
  const auto& L = layout_;
  CircuitState s = CircuitState::zero(graph_);
  s.phi = x.segment(L.phi(), L.n_phi);
  s.i_l = x.segment(L.i_l(), L.n_l);
  s.i_v = x.segment(L.i_v(), L.n_v);
  s.v_g = inc_.a_g.transpose() * s.phi;
  s.v_c = inc_.a_c.transpose() * s.phi;
  s.v_l = inc_.a_l.transpose() * s.phi;
  for (Eigen::Index j = 0; j < s.v_g.size(); ++j) s.i_g(j) = eval_element(g_[static_cast<std::size_t>(j)], s.v_g(j));
  for (Eigen::Index j = 0; j < s.v_c.size(); ++j) s.q_c(j) = eval_element(c_[static_cast<std::size_t>(j)], s.v_c(j));
  s.psi_l = l_.cwiseProduct(s.i_l);
  return s;
}

Eigen::VectorXd TraditionalSolver::pack(const CircuitState& s) const {
  Eigen::VectorXd x(layout_.size());
  x << s.phi, s.i_l, s.i_v;
  return x;
}

TraditionalSolver::StepResult TraditionalSolver::solve_step(const HistoryState& history, const StepRule& rule,
                                                            double t_next, const CircuitState& guess) const {
  // Plain Newton converges fastest through diode turn-on; the damped pass is the fallback.
  StepResult out = newton(history, rule, t_next, guess, false);
  if (!out.converged) {
    StepResult damped = newton(history, rule, t_next, guess, true);
    damped.iterations += out.iterations;
    out = std::move(damped);
  }
  if (!out.converged) {
    std::ostringstream msg;
    msg << "Newton did not converge at t = " << t_next << " (relative residual " << out.residual << ")";
    throw SolverError(msg.str());
  }
  return out;
}

TraditionalSolver::StepResult TraditionalSolver::newton(const HistoryState& history, const StepRule& rule,
                                                        double t_next, const CircuitState& guess, bool damped) const {
  StepResult out;
  Eigen::VectorXd x = pack(guess);
  Eval cur = residual(x, history, rule, t_next);
  // Merit for the damped pass: rows weighted by the scale at the guess, fixed for the whole step.
  const Eigen::ArrayXd row_weight = (cur.scale.array() + 1e-12 * cur.scale.sum() + 1e-300).inverse();
  auto merit = [&](const Eigen::VectorXd& f) { return (f.array() * row_weight).matrix().norm(); };
  for (int it = 1; it <= options_.max_iters; ++it) {
    const TraditionalSystem sys = assemble(x, history, rule, t_next);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.matrix);
    if (!lu.isInvertible()) {
      std::ostringstream msg;
      msg << "singular MNA matrix (rank " << lu.rank() << " of " << sys.matrix.rows()
          << "); check for voltage-source loops or current-source cut sets";
      throw SolverError(msg.str());
    }
    const Eigen::VectorXd dx = -lu.solve(sys.residual);

    double lambda = 1.0;
    Eigen::VectorXd x_new = x + dx;
    Eval next = residual(x_new, history, rule, t_next);
    for (int half = 0; half < options_.max_halvings; ++half) {
      const double m = merit(next.f);
      const bool ok = damped ? std::isfinite(m) && m <= (1.0 - 1e-4 * lambda) * merit(cur.f) : std::isfinite(m);
      if (ok) break;
      lambda *= 0.5;
      x_new = x + lambda * dx;
      next = residual(x_new, history, rule, t_next);
    }
    const double step = (x_new - x).lpNorm<Eigen::Infinity>();
    x = x_new;
    cur = next;
    out.iterations = it;
    // Blocks carry different units (node currents, inductor volts, source volts), so each is normalised on its own.
    const auto& L = layout_;
    out.residual = std::max({relative_residual(cur.f.segment(0, L.n_phi), cur.scale.segment(0, L.n_phi)),
                             relative_residual(cur.f.segment(L.i_l(), L.n_l), cur.scale.segment(L.i_l(), L.n_l)),
                             relative_residual(cur.f.segment(L.i_v(), L.n_v), cur.scale.segment(L.i_v(), L.n_v))});
    out.residual_history.push_back(out.residual);
    if (!std::isfinite(out.residual)) break;
    const bool stalled = step <= 1e-14 * std::max(1.0, x.lpNorm<Eigen::Infinity>()) && out.residual <= 1e-9;
    if (out.residual <= options_.rel_tol || stalled) {
      out.converged = true;
      out.state = expand(x);
      return out;
    }
  }
  return out;
}

CircuitState TraditionalSolver::initial_state(const TransientConfig& config) const {
  CircuitState s = CircuitState::zero(graph_);
  if (config.q0.size() == s.q_c.size()) {
    s.q_c = config.q0;
    for (Eigen::Index j = 0; j < s.q_c.size(); ++j) {
      const auto& m = c_[static_cast<std::size_t>(j)];
      if (const auto* lin = std::get_if<LinearModel>(&m)) s.v_c(j) = s.q_c(j) / lin->value;
      else if (const auto* mlcc = std::get_if<MlccCapacitorModel>(&m)) {
        double v = s.q_c(j) / mlcc->c_inf;
        for (int it = 0; it < 100; ++it) v -= (mlcc_charge(*mlcc, v) - s.q_c(j)) / mlcc_capacitance(*mlcc, v);
        s.v_c(j) = v;
      }
    }
  }
  if (config.psi0.size() == s.psi_l.size()) {
    s.psi_l = config.psi0;
    s.i_l = s.psi_l.cwiseQuotient(l_);
  }
  return s;
}

TransientTrace TraditionalSolver::run(const TransientConfig& config) const {
  config.validate();
  const double h = config.step_size();
  TransientTrace trace;
  trace.times.reserve(static_cast<std::size_t>(config.steps) + 1);
  trace.states.reserve(static_cast<std::size_t>(config.steps) + 1);

  CircuitState state = initial_state(config);
  HistoryState history = HistoryState::zero(graph_);
  history.q = state.q_c;
  history.psi = state.psi_l;

  trace.times.push_back(config.t0);
  trace.states.push_back(state);
  trace.diagnostics.push_back({});

  if (config.scheme == Scheme::Trapezoidal) {
    // Rates at t0 from one short backward-Euler step.
    const StepRule boot{Scheme::BackwardEuler, h / 100.0};
    const auto r = solve_step(history, boot, config.t0 + boot.h, state);
    history.q_dot = (r.state.q_c - history.q) / boot.h;
    history.psi_dot = (r.state.psi_l - history.psi) / boot.h;
  }

  const StepRule rule{config.scheme, h};
  for (int k = 1; k <= config.steps; ++k) {
    const double t = config.t0 + h * k;
    auto r = solve_step(history, rule, t, state);
    const double kirchhoff = kirchhoff_residual(graph_, inc_, r.state, history, rule, t).max();
    history = advance_history(history, r.state, rule);
    state = std::move(r.state);
    trace.times.push_back(t);
    trace.states.push_back(state);
    trace.diagnostics.push_back({r.iterations, r.converged, r.residual, std::move(r.residual_history), {}, kirchhoff});
  }
  return trace;
}

TransientTrace run_transient_traditional(const CircuitGraph& graph, const CircuitBindings& bindings,
                                         const TransientConfig& config, NewtonOptions options) {
  return TraditionalSolver(graph, bindings, options).run(config);
}

double analytic_rc_voltage(double r, double c, double v, double t) { return v * -std::expm1(-t / (r * c)); }

} // namespace ddmna
