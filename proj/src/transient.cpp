#include "ddmna/transient.hpp"

#include "ddmna/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace ddmna {

Scheme parse_scheme(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "be" || s == "backward-euler" || s == "euler") return Scheme::BackwardEuler;
  if (s == "tr" || s == "trapezoidal" || s == "trap") return Scheme::Trapezoidal;
  throw ConfigError("unknown scheme '" + std::string(text) + "'");
}

std::string_view scheme_name(Scheme s) { return s == Scheme::BackwardEuler ? "be" : "tr"; }

void TransientConfig::validate() const {
  if (!(t_end > t0)) throw ConfigError("t_end must be greater than t0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
}

HistoryState HistoryState::zero(const CircuitGraph& graph) {
  const auto nc = static_cast<Eigen::Index>(graph.n_c());
  const auto nl = static_cast<Eigen::Index>(graph.n_l());
  return {Eigen::VectorXd::Zero(nc), Eigen::VectorXd::Zero(nl), Eigen::VectorXd::Zero(nc),
          Eigen::VectorXd::Zero(nl)};
}

Eigen::VectorXd HistoryState::q_term(const StepRule& rule) const {
  Eigen::VectorXd r = rule.alpha() * q;
  if (rule.scheme == Scheme::Trapezoidal) r += q_dot;
  return r;
}

Eigen::VectorXd HistoryState::psi_term(const StepRule& rule) const {
  Eigen::VectorXd r = rule.alpha() * psi;
  if (rule.scheme == Scheme::Trapezoidal) r += psi_dot;
  return r;
}

CircuitState CircuitState::zero(const CircuitGraph& graph) {
  auto z = [](std::size_t n) { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)); };
  return {z(graph.nodes.size()), z(graph.n_g()), z(graph.n_g()), z(graph.n_c()), z(graph.n_c()),
          z(graph.n_l()),        z(graph.n_l()), z(graph.n_l()), z(graph.n_v())};
}

HistoryState advance_history(const HistoryState& prev, const CircuitState& accepted, const StepRule& rule) {
  HistoryState next;
  next.q = accepted.q_c;
  next.psi = accepted.psi_l;
  next.q_dot = rule.alpha() * accepted.q_c - prev.q_term(rule);
  next.psi_dot = rule.alpha() * accepted.psi_l - prev.psi_term(rule);
  return next;
}

Eigen::VectorXd source_voltages(const CircuitGraph& graph, double t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(graph.n_v()));
  for (std::size_t j = 0; j < graph.n_v(); ++j)
    v(static_cast<Eigen::Index>(j)) = source_value(*graph.elements[graph.v[j]].waveform, t);
  return v;
}

Eigen::VectorXd source_currents(const CircuitGraph& graph, double t) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(graph.n_src()));
  for (std::size_t j = 0; j < graph.n_src(); ++j)
    v(static_cast<Eigen::Index>(j)) = source_value(*graph.elements[graph.i[j]].waveform, t);
  return v;
}

double KirchhoffResidual::max() const { return std::max({kcl, voltage, inductor, source}); }

namespace {

// max |r| over the largest row magnitude (sum of |terms|). A row-wise ratio cannot be met in double precision
// when a branch current comes from the difference of two nearly equal potentials.
double relative(const Eigen::VectorXd& r, const Eigen::VectorXd& scale) {
  if (r.size() == 0) return 0.0;
  return r.lpNorm<Eigen::Infinity>() / (scale.lpNorm<Eigen::Infinity>() + 1e-300);
}

} // namespace

KirchhoffResidual kirchhoff_residual(const CircuitGraph& graph, const IncidenceSet& inc, const CircuitState& s,
                                     const HistoryState& history, const StepRule& rule, double t) {
  KirchhoffResidual res;
  const Eigen::VectorXd q_dot = rule.alpha() * s.q_c - history.q_term(rule);
  const Eigen::VectorXd psi_dot = rule.alpha() * s.psi_l - history.psi_term(rule);
  const Eigen::VectorXd i_src = source_currents(graph, t);

  const Eigen::VectorXd kcl =
      inc.a_g * s.i_g + inc.a_c * q_dot + inc.a_l * s.i_l + inc.a_v * s.i_v - inc.a_i * i_src;
  const Eigen::VectorXd kcl_scale = inc.a_g.cwiseAbs() * s.i_g.cwiseAbs() + inc.a_c.cwiseAbs() * q_dot.cwiseAbs() +
                                    inc.a_l.cwiseAbs() * s.i_l.cwiseAbs() + inc.a_v.cwiseAbs() * s.i_v.cwiseAbs() +
                                    inc.a_i.cwiseAbs() * i_src.cwiseAbs() +
                                    inc.a_c.cwiseAbs() * (rule.alpha() * s.q_c).cwiseAbs();
  res.kcl = relative(kcl, kcl_scale);

  auto volt = [&](const Eigen::MatrixXd& a, const Eigen::VectorXd& v) {
    const Eigen::VectorXd r = a.transpose() * s.phi - v;
    const Eigen::VectorXd scale = a.cwiseAbs().transpose() * s.phi.cwiseAbs() + v.cwiseAbs();
    return relative(r, scale);
  };
  res.voltage = std::max({volt(inc.a_g, s.v_g), volt(inc.a_c, s.v_c), volt(inc.a_l, s.v_l)});
  res.inductor = volt(inc.a_l, psi_dot);
  res.source = volt(inc.a_v, source_voltages(graph, t));
  return res;
}

namespace {

void put(std::ostream& out, double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out << buf;
}

} // namespace

void write_trace_csv(std::ostream& out, const CircuitGraph& graph, const TransientTrace& trace) {
  out << "t";
  for (const auto& n : graph.nodes) out << ",phi_" << n;
  for (const auto& e : graph.elements) {
    switch (branch_class(e.kind)) {
    case BranchClass::G: out << ",v_" << e.name << ",i_" << e.name; break;
    case BranchClass::C: out << ",v_" << e.name << ",q_" << e.name; break;
    case BranchClass::L: out << ",v_" << e.name << ",psi_" << e.name << ",i_" << e.name; break;
    case BranchClass::V: out << ",i_" << e.name; break;
    case BranchClass::I: break;
    }
  }
  out << '\n';
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& s = trace.states[k];
    put(out, trace.times[k]);
    for (Eigen::Index r = 0; r < s.phi.size(); ++r) out << ',', put(out, s.phi(r));
    for (std::size_t idx = 0; idx < graph.elements.size(); ++idx) {
      const auto& e = graph.elements[idx];
      const auto j = static_cast<Eigen::Index>(graph.column_of(idx));
      switch (branch_class(e.kind)) {
      case BranchClass::G: out << ','; put(out, s.v_g(j)); out << ','; put(out, s.i_g(j)); break;
      case BranchClass::C: out << ','; put(out, s.v_c(j)); out << ','; put(out, s.q_c(j)); break;
      case BranchClass::L:
        out << ','; put(out, s.v_l(j)); out << ','; put(out, s.psi_l(j)); out << ','; put(out, s.i_l(j));
        break;
      case BranchClass::V: out << ','; put(out, s.i_v(j)); break;
      case BranchClass::I: break;
      }
    }
    out << '\n';
  }
}

void write_summary_csv(std::ostream& out, const TransientTrace& trace, std::span<const double> output,
                       std::span<const double> expected) {
  const bool compare = !expected.empty();
  if (compare && (output.size() != trace.size() || expected.size() != trace.size()))
    throw Error("summary comparison columns must cover every time point");
  // Newton traces carry a residual where data-driven ones carry the energy mismatch.
  const bool data_driven = !trace.data_states.empty();
  out << "step,iterations,converged," << (data_driven ? "final_mismatch" : "final_residual") << ",t,kirchhoff";
  if (compare) out << ",output,expected,abs_error";
  out << '\n';
  for (std::size_t k = 1; k < trace.diagnostics.size(); ++k) {
    const auto& d = trace.diagnostics[k];
    out << k << ',' << d.iterations << ',' << (d.converged ? 1 : 0) << ',';
    put(out, d.final_value);
    out << ',';
    put(out, trace.times[k]);
    out << ',';
    put(out, d.kirchhoff);
    if (compare) {
      out << ',';
      put(out, output[k]);
      out << ',';
      put(out, expected[k]);
      out << ',';
      put(out, std::abs(output[k] - expected[k]));
    }
    out << '\n';
  }
}

void write_convergence_csv(std::ostream& out, const TransientTrace& trace) {
  out << "step,iteration," << (trace.data_states.empty() ? "residual" : "energy_mismatch") << '\n';
  for (std::size_t k = 1; k < trace.diagnostics.size(); ++k) {
    const auto& h = trace.diagnostics[k].history;
    for (std::size_t p = 0; p < h.size(); ++p) {
      out << k << ',' << (p + 1) << ',';
      put(out, h[p]);
      out << '\n';
    }
  }
}

} // namespace ddmna
