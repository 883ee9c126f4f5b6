#include "ddmna/scenarios.hpp"

#include "ddmna/bindings.hpp"
#include "ddmna/error.hpp"
#include "ddmna/reference.hpp"

#include <algorithm>
#include <cmath>

namespace ddmna {

ScenarioKind parse_scenario(std::string_view name) {
  if (name == "rc-linear") return ScenarioKind::RcLinear;
  if (name == "rc-nonlinear") return ScenarioKind::RcNonlinear;
  if (name == "rectifier") return ScenarioKind::Rectifier;
  throw ConfigError("unknown scenario '" + std::string(name) + "' (expected rc-linear, rc-nonlinear or rectifier)");
}

std::string_view scenario_name(ScenarioKind kind) {
  switch (kind) {
  case ScenarioKind::RcLinear: return "rc-linear";
  case ScenarioKind::RcNonlinear: return "rc-nonlinear";
  case ScenarioKind::Rectifier: return "rectifier";
  }
  return "";
}

Scenario make_scenario(ScenarioKind kind) {
  Scenario s;
  s.kind = kind;
  switch (kind) {
  case ScenarioKind::RcLinear:
    s.netlist = "V1 1 0 DC 1\nR1 1 2 1e3\nC1 2 0 1e-6\n";
    s.data_elements = {{"R1"}, {"C1"}};
    s.output_element = "C1";
    s.output_node = "2";
    s.t_end = 5e-3;
    s.steps = 1000;
    s.n_values = {1e2, 1e3, 1e4, 1e5};
    s.analytic = true;
    break;
  case ScenarioKind::RcNonlinear:
    s.netlist = "V1 1 0 DC 10\nR1 1 2 200e3\nC1 2 0 MODEL mlcc(10e-6,2e-6,1)\n";
    s.data_elements = {{"C1"}};
    s.output_element = "C1";
    s.output_node = "2";
    s.t_end = 1.0;
    s.steps = 1000;
    s.n_values = {1e2, 1e3, 1e4, 1e5};
    s.nonlinear_until = 0.5;
    break;
  case ScenarioKind::Rectifier:
    s.netlist = "V1 1 0 SIN 0 5 100\nD1 1 2 MODEL shockley(2.52e-9,1.752,25.85e-3,10e-3)\nC1 2 0 100e-6\nRL 2 0 1e3\n";
    s.data_elements = {{"D1", Spacing::ArcLength, Drive::A}};
    s.output_element = "C1";
    s.output_node = "2";
    s.t_end = 20e-3;
    s.steps = 400;
    s.n_values = {1e3, 1e4, 1e5, 1e6};
    break;
  }
  return s;
}

TransientTrace reference_trace(const Scenario& scenario, const CircuitGraph& graph, const TransientTrace& trad) {
  TransientTrace ref = trad;
  if (!scenario.analytic) return ref;
  const std::size_t idx = graph.find(scenario.output_element);
  const auto col = static_cast<Eigen::Index>(graph.column_of(idx));
  const std::size_t node = static_cast<std::size_t>(
      std::find(graph.nodes.begin(), graph.nodes.end(), scenario.output_node) - graph.nodes.begin());
  for (std::size_t k = 0; k < ref.size(); ++k) {
    auto& s = ref.states[k];
    const double v = analytic_rc_voltage(scenario.r, scenario.c, scenario.v, ref.times[k]);
    s.v_c(col) = v;
    s.q_c(col) = scenario.c * v;
    if (node < graph.nodes.size()) s.phi(static_cast<Eigen::Index>(node)) = v;
  }
  return ref;
}

std::vector<MeasurementSet> synthesize_datasets(const Scenario& scenario, const CircuitGraph& graph,
                                                const TransientTrace& trad, std::size_t n, double margin) {
  const Envelope env = operating_envelope(graph, trad, margin);
  const std::size_t per = std::max<std::size_t>(1, n / std::max<std::size_t>(1, scenario.data_elements.size()));
  std::vector<MeasurementSet> out;
  for (const auto& plan_spec : scenario.data_elements) {
    const std::size_t idx = graph.find(plan_spec.name);
    if (idx == CircuitGraph::npos) throw ConfigError("scenario element " + plan_spec.name + " missing");
    const auto& e = graph.elements[idx];
    const auto cls = branch_class(e.kind);
    const std::size_t col = graph.column_of(idx);
    const ElementModel& model = *e.model();
    Range a, b;
    switch (cls) {
    case BranchClass::G: a = env.g_a[col], b = env.g_b[col]; break;
    case BranchClass::C: a = env.c_a[col], b = env.c_b[col]; break;
    default: a = env.l_a[col], b = env.l_b[col]; break;
    }
    SamplingPlan plan;
    plan.count = per;
    plan.spacing = plan_spec.spacing;
    plan.drive = plan_spec.drive;
    if (plan.drive == Drive::A) {
      // Keep the grid inside the dependent-coordinate envelope as well.
      const auto* diode = std::get_if<ShockleyDiodeModel>(&model);
      if (!diode || b.lo > -diode->i_s) a.lo = std::max(a.lo, invert_element(model, b.lo));
      a.hi = std::min(a.hi, invert_element(model, b.hi));
      plan.lo = a.lo, plan.hi = a.hi;
    } else {
      plan.lo = b.lo, plan.hi = b.hi;
    }
    out.push_back(generate_measurements(model, pair_kind(cls), plan));
  }
  return out;
}

double median_iterations(const TransientTrace& trace) {
  std::vector<int> it;
  for (std::size_t k = 1; k < trace.diagnostics.size(); ++k) it.push_back(trace.diagnostics[k].iterations);
  if (it.empty()) return 0.0;
  std::sort(it.begin(), it.end());
  const std::size_t m = it.size() / 2;
  return it.size() % 2 ? it[m] : 0.5 * (it[m - 1] + it[m]);
}

double worst_mismatch_increase(const TransientTrace& trace) {
  double worst = 0.0;
  for (std::size_t k = 1; k < trace.diagnostics.size(); ++k) {
    const auto& h = trace.diagnostics[k].history;
    if (h.empty()) continue;
    const double ref = std::max(h.front(), 1e-300);
    for (std::size_t p = 1; p < h.size(); ++p) worst = std::max(worst, (h[p] - h[p - 1]) / ref);
  }
  return worst;
}

CellResult run_cell(const Scenario& scenario, const CellSpec& spec) {
  CellResult r;
  r.spec = spec;
  try {
    const CircuitGraph graph = parse_netlist(scenario.netlist);
    TransientConfig tc;
    tc.scheme = spec.scheme;
    tc.t_end = scenario.t_end;
    tc.steps = spec.steps;

    const CircuitBindings models = bind_circuit(graph);
    r.trad = run_transient_traditional(graph, models, tc);
    r.ref = reference_trace(scenario, graph, r.trad);

    auto sets = synthesize_datasets(scenario, graph, r.trad, spec.n, spec.margin);
    CircuitBindings bindings = models;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      r.measurements += sets[k].size();
      bind_data(graph, bindings, scenario.data_elements[k].name, std::move(sets[k]));
    }
    r.dd = run_transient_dd(graph, bindings, tc, spec.dd);

    const std::size_t idx = graph.find(scenario.output_element);
    ErrorTarget target{branch_class(graph.elements[idx].kind), graph.column_of(idx), *graph.elements[idx].model()};
    const auto d = decompose_error(r.dd, r.trad, r.ref, target);
    r.rms = d.total;
    r.rms_time = d.time;
    r.rms_data = d.data;
    r.error = energy_mismatch_error(r.dd, r.ref, target);

    const auto node = static_cast<Eigen::Index>(
        std::find(graph.nodes.begin(), graph.nodes.end(), scenario.output_node) - graph.nodes.begin());
    std::vector<double> out, out_ref;
    for (std::size_t k = 0; k < r.dd.size(); ++k) {
      out.push_back(r.dd.states[k].phi(node));
      out_ref.push_back(r.trad.states[k].phi(node));
    }
    r.output_rel_rms = relative_rms(out, out_ref);

    r.median_iters = median_iterations(r.dd);
    double sum = 0.0, trad_sum = 0.0;
    for (std::size_t k = 1; k < r.dd.diagnostics.size(); ++k) {
      const auto& dg = r.dd.diagnostics[k];
      sum += dg.iterations;
      trad_sum += r.trad.diagnostics[k].iterations;
      r.nonconverged += dg.converged ? 0 : 1;
      r.max_kirchhoff = std::max(r.max_kirchhoff, dg.kirchhoff);
    }
    r.mean_iters = sum / static_cast<double>(spec.steps);
    r.trad_mean_iters = trad_sum / static_cast<double>(spec.steps);
    r.monotone = worst_mismatch_increase(r.dd) <= 1e-12;

    if (scenario.nonlinear_until > 0.0) {
      double e0 = 0.0, e1 = 0.0;
      std::size_t n0 = 0, n1 = 0;
      for (std::size_t k = 1; k < r.error.values.size(); ++k) {
        if (r.error.times[k] < scenario.nonlinear_until) e0 += r.error.values[k], ++n0;
        else e1 += r.error.values[k], ++n1;
      }
      r.early_error = n0 ? e0 / static_cast<double>(n0) : 0.0;
      r.late_error = n1 ? e1 / static_cast<double>(n1) : 0.0;
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.message = e.what();
  }
  return r;
}

} // namespace ddmna
