#include "ddmna/cli.hpp"

#include "ddmna/bindings.hpp"
#include "ddmna/error.hpp"
#include "ddmna/metrics.hpp"
#include "ddmna/reference.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace ddmna {

namespace {

std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

SolverKind parse_solver(const std::string& text) {
  const auto s = lower(text);
  if (s == "traditional" || s == "newton") return SolverKind::Traditional;
  if (s == "data-driven" || s == "dd") return SolverKind::DataDriven;
  throw ConfigError("run.solver: expected traditional or data-driven, got '" + text + "'");
}

std::string_view solver_name(SolverKind k) { return k == SolverKind::Traditional ? "traditional" : "data-driven"; }

Spacing parse_spacing(const std::string& text, std::string_view field) {
  const auto s = lower(text);
  if (s == "uniform" || s == "linear") return Spacing::Uniform;
  if (s == "log" || s == "log-symmetric") return Spacing::LogSymmetric;
  if (s == "arc" || s == "arc-length") return Spacing::ArcLength;
  throw ConfigError(std::string(field) + ": expected uniform, log or arc, got '" + text + "'");
}

std::string_view spacing_name(Spacing s) {
  switch (s) {
  case Spacing::Uniform: return "uniform";
  case Spacing::LogSymmetric: return "log";
  case Spacing::ArcLength: return "arc";
  }
  return "";
}

ElementWeight::Rule parse_weight_rule(const std::string& text) {
  const auto s = lower(text);
  if (s == "constant") return ElementWeight::Rule::Constant;
  if (s == "local-tangent" || s == "tangent") return ElementWeight::Rule::LocalTangent;
  throw ConfigError("dd.weights: expected constant or local-tangent, got '" + text + "'");
}

void read_dd(const ConfigFile& cfg, DDConfig& dd) {
  dd.tol_em = cfg.number("dd.tol_em", dd.tol_em);
  dd.max_iters = static_cast<int>(cfg.integer("dd.max_iters", dd.max_iters));
  if (auto w = cfg.get("dd.weights")) dd.weight_rule = parse_weight_rule(*w);
  dd.tangent_k = static_cast<std::size_t>(cfg.integer("dd.tangent_k", static_cast<long>(dd.tangent_k)));
  dd.eliminate_known = cfg.flag("dd.eliminate_known", dd.eliminate_known);
  dd.neighbor_search = cfg.flag("dd.neighbor_search", dd.neighbor_search);
  dd.initial_seed = cfg.flag("dd.initial_seed", dd.initial_seed);
  dd.virtual_count = static_cast<std::size_t>(cfg.integer("dd.virtual_count", static_cast<long>(dd.virtual_count)));
  dd.virtual_margin = cfg.number("dd.virtual_margin", dd.virtual_margin);
}

void write_dd(const DDConfig& dd, ConfigFile& cfg) {
  cfg.set("dd.tol_em", num(dd.tol_em));
  cfg.set("dd.max_iters", std::to_string(dd.max_iters));
  cfg.set("dd.weights", dd.weight_rule == ElementWeight::Rule::Constant ? "constant" : "local-tangent");
  cfg.set("dd.tangent_k", std::to_string(dd.tangent_k));
  cfg.set("dd.eliminate_known", dd.eliminate_known ? "true" : "false");
  cfg.set("dd.neighbor_search", dd.neighbor_search ? "true" : "false");
  cfg.set("dd.initial_seed", dd.initial_seed ? "true" : "false");
  cfg.set("dd.virtual_count", std::to_string(dd.virtual_count));
  cfg.set("dd.virtual_margin", num(dd.virtual_margin));
}

ConfigFile snapshot(const RunConfig& rc) {
  ConfigFile cfg;
  cfg.set("run.netlist", rc.netlist);
  cfg.set("run.solver", std::string(solver_name(rc.solver)));
  cfg.set("run.out", rc.out_dir);
  cfg.set("run.seed", std::to_string(rc.seed));
  cfg.set("transient.scheme", std::string(scheme_name(rc.transient.scheme)));
  cfg.set("transient.t0", num(rc.transient.t0));
  cfg.set("transient.t_end", num(rc.transient.t_end));
  cfg.set("transient.steps", std::to_string(rc.transient.steps));
  write_dd(rc.dd, cfg);
  for (const auto& d : rc.datasets) {
    const std::string sec = "data." + d.element + ".";
    if (d.file) {
      cfg.set(sec + "file", *d.file);
      continue;
    }
    cfg.set(sec + "n", std::to_string(d.plan.count));
    cfg.set(sec + "spacing", std::string(spacing_name(d.plan.spacing)));
    cfg.set(sec + "drive", d.plan.drive == Drive::A ? "a" : "b");
    if (d.explicit_range) cfg.set(sec + "range", num(d.plan.lo) + ":" + num(d.plan.hi));
    else cfg.set(sec + "margin", num(d.margin));
  }
  return cfg;
}

template <class F>
void write_file(const fs::path& path, F&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  body(out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

// Series RC charged from a DC source: V(x,0), R(x,y), C(y,0) with linear models.
struct SeriesRc {
  double r = 0.0, c = 0.0, v = 0.0;
  std::size_t c_column = 0;
};

std::optional<SeriesRc> detect_series_rc(const CircuitGraph& g) {
  if (g.v.size() != 1 || g.g.size() != 1 || g.c.size() != 1 || !g.l.empty() || !g.i.empty()) return std::nullopt;
  const auto& v = g.elements[g.v[0]];
  const auto& r = g.elements[g.g[0]];
  const auto& c = g.elements[g.c[0]];
  if (!v.waveform || v.waveform->kind != WaveformKind::Dc || v.node_neg != "0") return std::nullopt;
  if (c.node_neg != "0" || r.kind != ElementKind::Resistor) return std::nullopt;
  const auto* rm = r.model();
  const auto* cm = c.model();
  if (!rm || !cm || !is_linear(*rm) || !is_linear(*cm)) return std::nullopt;
  const bool forward = r.node_pos == v.node_pos && r.node_neg == c.node_pos;
  const bool backward = r.node_neg == v.node_pos && r.node_pos == c.node_pos;
  if (!forward && !backward) return std::nullopt;
  return SeriesRc{1.0 / std::get<LinearModel>(*rm).value, std::get<LinearModel>(*cm).value, v.waveform->dc_value, 0};
}

} // namespace

RunConfig RunConfig::from(const ConfigFile& cfg) {
  RunConfig rc;
  rc.netlist = cfg.text("run.netlist", "");
  rc.solver = parse_solver(cfg.text("run.solver", "traditional"));
  rc.out_dir = cfg.text("run.out", rc.out_dir);
  rc.seed = cfg.integer("run.seed", 0);
  rc.transient.scheme = parse_scheme(cfg.text("transient.scheme", "tr"));
  rc.transient.t0 = cfg.number("transient.t0", rc.transient.t0);
  rc.transient.t_end = cfg.number("transient.t_end", rc.transient.t_end);
  rc.transient.steps = static_cast<int>(cfg.integer("transient.steps", rc.transient.steps));
  read_dd(cfg, rc.dd);
  for (const auto& sec : cfg.sections("data.")) {
    DatasetSpec d;
    d.element = sec.substr(5);
    const std::string p = sec + ".";
    if (auto f = cfg.get(p + "file")) {
      d.file = *f;
    } else {
      d.plan.count = static_cast<std::size_t>(cfg.integer(p + "n", 1000));
      d.plan.spacing = parse_spacing(cfg.text(p + "spacing", "uniform"), p + "spacing");
      const auto drive = lower(cfg.text(p + "drive", "a"));
      if (drive != "a" && drive != "b") throw ConfigError(p + "drive: expected a or b");
      d.plan.drive = drive == "a" ? Drive::A : Drive::B;
      if (auto r = cfg.get(p + "range")) {
        std::tie(d.plan.lo, d.plan.hi) = parse_range(*r, p + "range");
        d.explicit_range = true;
      }
      d.margin = cfg.number(p + "margin", d.margin);
    }
    rc.datasets.push_back(std::move(d));
  }
  return rc;
}

void RunConfig::validate() const {
  if (netlist.empty()) throw ConfigError("run.netlist: missing");
  if (!fs::exists(netlist)) throw ConfigError("run.netlist: file not found: '" + netlist + "'");
  if (transient.steps < 1) throw ConfigError("transient.steps: must be >= 1");
  if (!(transient.t_end > transient.t0)) throw ConfigError("transient.t_end: must exceed transient.t0");
  try {
    dd.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("dd: ") + e.what());
  }
  for (const auto& d : datasets) {
    const std::string p = "data." + d.element + ".";
    if (d.file && !fs::exists(*d.file)) throw ConfigError(p + "file: file not found: '" + *d.file + "'");
    if (!d.file) {
      if (d.plan.count < 1) throw ConfigError(p + "n: must be >= 1");
      if (d.explicit_range && !(d.plan.hi >= d.plan.lo)) throw ConfigError(p + "range: needs lo <= hi");
      if (!(d.margin >= 1.0)) throw ConfigError(p + "margin: must be >= 1");
    }
  }
}

ExperimentSpec ExperimentSpec::from(const ConfigFile& cfg) {
  ExperimentSpec s;
  s.scenario = parse_scenario(cfg.text("experiment.scenario", "rc-linear"));
  if (auto n = cfg.get("experiment.n")) s.n = parse_number_list(*n, "experiment.n");
  for (const auto& name : split(cfg.text("experiment.schemes", "tr"), ','))
    if (!name.empty()) s.schemes.push_back(parse_scheme(name));
  if (auto k = cfg.get("experiment.steps"))
    for (double x : parse_number_list(*k, "experiment.steps")) s.steps.push_back(static_cast<int>(x));
  s.margin = cfg.number("experiment.margin", s.margin);
  s.out_dir = cfg.text("experiment.out", s.out_dir);
  s.jobs = static_cast<int>(cfg.integer("experiment.jobs", 0));
  read_dd(cfg, s.dd);
  return s;
}

void ExperimentSpec::validate() const {
  for (double x : n)
    if (!(x >= 1.0)) throw ConfigError("experiment.n: values must be >= 1");
  for (int k : steps)
    if (k < 1) throw ConfigError("experiment.steps: values must be >= 1");
  if (schemes.empty()) throw ConfigError("experiment.schemes: empty");
  if (!(margin >= 1.0)) throw ConfigError("experiment.margin: must be >= 1");
  if (jobs < 0) throw ConfigError("experiment.jobs: must be >= 0");
  dd.validate();
}

int cmd_run(const RunConfig& config, std::ostream& log) {
  config.validate();
  const CircuitGraph graph = parse_netlist_file(config.netlist);
  const std::string base = fs::path(config.netlist).parent_path().string();
  CircuitBindings bindings = bind_circuit(graph, base.empty() ? "." : base);

  TransientTrace trace;
  if (config.solver == SolverKind::Traditional) {
    if (!config.datasets.empty()) log << "warning: datasets are ignored by the traditional solver\n";
    trace = run_transient_traditional(graph, bindings, config.transient);
  } else {
    // Ranges that follow the operating envelope need a model-based run first.
    std::optional<TransientTrace> envelope_run;
    for (const auto& d : config.datasets) {
      const std::size_t idx = graph.find(d.element);
      if (idx == CircuitGraph::npos) throw ConfigError("data." + d.element + ": no such element in the netlist");
      const auto cls = branch_class(graph.elements[idx].kind);
      if (d.file) {
        std::size_t dups = 0;
        MeasurementSet set = read_measurements_file(*d.file, &dups);
        if (dups > 0) log << "warning: " << d.element << ": dropped " << dups << " duplicate measurement pairs\n";
        bind_data(graph, bindings, d.element, std::move(set));
        continue;
      }
      const ElementModel* model = graph.elements[idx].model();
      if (!model) throw ConfigError("data." + d.element + ": sampling needs a MODEL for the element");
      SamplingPlan plan = d.plan;
      if (!d.explicit_range) {
        if (!envelope_run) envelope_run = run_transient_traditional(graph, bind_circuit(graph, base.empty() ? "." : base), config.transient);
        const Envelope env = operating_envelope(graph, *envelope_run, d.margin);
        const std::size_t col = graph.column_of(idx);
        const bool a = plan.drive == Drive::A;
        const Range r = cls == BranchClass::G ? (a ? env.g_a[col] : env.g_b[col])
                        : cls == BranchClass::C ? (a ? env.c_a[col] : env.c_b[col])
                                                : (a ? env.l_a[col] : env.l_b[col]);
        plan.lo = r.lo;
        plan.hi = r.hi;
      }
      bind_data(graph, bindings, d.element, generate_measurements(*model, pair_kind(cls), plan));
    }
    trace = run_transient_dd(graph, bindings, config.transient, config.dd);
  }

  const fs::path out(config.out_dir);
  fs::create_directories(out);
  write_file(out / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, graph, trace); });
  write_file(out / "convergence.csv", [&](std::ostream& o) { write_convergence_csv(o, trace); });

  const auto rc = detect_series_rc(graph);
  std::vector<double> output, expected;
  if (rc && config.transient.q0.size() == 0) {
    for (std::size_t k = 0; k < trace.size(); ++k) {
      output.push_back(trace.states[k].v_c(0));
      expected.push_back(analytic_rc_voltage(rc->r, rc->c, rc->v, trace.times[k] - config.transient.t0));
    }
  }
  write_file(out / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, trace, output, expected); });
  write_file(out / "config.ini", [&](std::ostream& o) { snapshot(config).write(o); });

  int nonconverged = 0;
  double iters = 0.0, kirchhoff = 0.0;
  for (std::size_t k = 1; k < trace.diagnostics.size(); ++k) {
    const auto& d = trace.diagnostics[k];
    nonconverged += d.converged ? 0 : 1;
    iters += d.iterations;
    kirchhoff = std::max(kirchhoff, d.kirchhoff);
  }
  log << solver_name(config.solver) << ": " << config.transient.steps << " steps, mean iterations "
      << iters / config.transient.steps << ", max Kirchhoff residual " << kirchhoff << '\n';
  if (!expected.empty()) {
    double worst = 0.0;
    for (std::size_t k = 0; k < output.size(); ++k) worst = std::max(worst, std::abs(output[k] - expected[k]));
    log << "series RC: max |v_C - analytic| = " << worst << " V\n";
  }
  if (nonconverged > 0)
    log << "warning: " << nonconverged << " steps stopped at max_iters; their best pair was kept\n";
  log << "wrote " << (out / "trace.csv").string() << ", convergence.csv, summary.csv, config.ini\n";
  return kExitOk;
}

int cmd_generate(const GenerateSpec& spec, std::ostream& log) {
  spec.plan.validate();
  const MeasurementSet set = generate_measurements(spec.model, spec.kind, spec.plan);
  if (spec.out == "-") {
    write_measurements_csv(std::cout, set);
  } else {
    const fs::path p(spec.out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, [&](std::ostream& o) { write_measurements_csv(o, set); });
  }
  double alo = INFINITY, ahi = -INFINITY, blo = INFINITY, bhi = -INFINITY;
  for (const auto& q : set.pairs) {
    alo = std::min(alo, q.a), ahi = std::max(ahi, q.a);
    blo = std::min(blo, q.b), bhi = std::max(bhi, q.b);
  }
  log << "N = " << set.size() << ", a in [" << alo << ", " << ahi << "], b in [" << blo << ", " << bhi << "]\n";
  return kExitOk;
}

namespace {

struct Cell {
  Scheme scheme;
  int steps;
  std::size_t n;
};

std::string cell_name(const Cell& c) {
  return std::string(scheme_name(c.scheme)) + "_K" + std::to_string(c.steps) + "_N" + std::to_string(c.n);
}

void write_cell(const fs::path& dir, const Scenario& sc, const Cell& cell, const CellResult& r, const ExperimentSpec& spec) {
  fs::create_directories(dir);
  ConfigFile cfg;
  cfg.set("experiment.scenario", std::string(scenario_name(sc.kind)));
  cfg.set("experiment.scheme", std::string(scheme_name(cell.scheme)));
  cfg.set("experiment.steps", std::to_string(cell.steps));
  cfg.set("experiment.n", std::to_string(cell.n));
  cfg.set("experiment.margin", num(spec.margin));
  cfg.set("experiment.t_end", num(sc.t_end));
  cfg.set("experiment.netlist", [&] {
    std::string s = sc.netlist;
    std::replace(s.begin(), s.end(), '\n', '|');
    return s;
  }());
  write_dd(spec.dd, cfg);
  write_file(dir / "config.ini", [&](std::ostream& o) { cfg.write(o); });
  if (!r.ok) {
    write_file(dir / "error.txt", [&](std::ostream& o) { o << r.message << '\n'; });
    return;
  }
  const CircuitGraph graph = parse_netlist(sc.netlist);
  write_file(dir / "trace.csv", [&](std::ostream& o) { write_trace_csv(o, graph, r.dd); });
  write_file(dir / "reference.csv", [&](std::ostream& o) { write_trace_csv(o, graph, r.ref); });
  write_file(dir / "convergence.csv", [&](std::ostream& o) { write_convergence_csv(o, r.dd); });
  write_file(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, r.dd); });
  write_file(dir / "error.csv", [&](std::ostream& o) {
    o << "t,eps2_em\n";
    for (std::size_t k = 0; k < r.error.times.size(); ++k) o << num(r.error.times[k]) << ',' << num(r.error.values[k]) << '\n';
  });
  const auto node = static_cast<Eigen::Index>(
      std::find(graph.nodes.begin(), graph.nodes.end(), sc.output_node) - graph.nodes.begin());
  write_file(dir / "output.csv", [&](std::ostream& o) {
    o << "t,v_reference,v_data_driven\n";
    for (std::size_t k = 0; k < r.dd.size(); ++k)
      o << num(r.dd.times[k]) << ',' << num(r.ref.states[k].phi(node)) << ',' << num(r.dd.states[k].phi(node)) << '\n';
  });
}

} // namespace

int cmd_experiment(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  const Scenario sc = make_scenario(spec.scenario);
  const std::vector<double> ns = spec.n.empty() ? sc.n_values : spec.n;
  const std::vector<int> ks = spec.steps.empty() ? std::vector<int>{sc.steps} : spec.steps;

  std::vector<Cell> cells;
  for (Scheme s : spec.schemes)
    for (int k : ks)
      for (double n : ns) cells.push_back({s, k, static_cast<std::size_t>(std::llround(n))});

  const fs::path root = fs::path(spec.out_dir) / std::string(scenario_name(sc.kind));
  fs::create_directories(root);
  std::vector<CellResult> results(cells.size());
  const int jobs = spec.jobs > 0 ? spec.jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(cells.size()); ++c) {
    const auto& cell = cells[static_cast<std::size_t>(c)];
    CellSpec cs;
    cs.scheme = cell.scheme;
    cs.steps = cell.steps;
    cs.n = cell.n;
    cs.margin = spec.margin;
    cs.dd = spec.dd;
    auto& r = results[static_cast<std::size_t>(c)];
    r = run_cell(sc, cs);
    try {
      write_cell(root / cell_name(cell), sc, cell, r, spec);
    } catch (const std::exception& e) {
      r.ok = false;
      r.message = e.what();
    }
#pragma omp critical(experiment_log)
    log << cell_name(cell) << (r.ok ? ": rms " + num(r.rms) : ": FAILED " + r.message) << '\n';
    // Traces are on disk now; keep only the scalars.
    r.dd = {};
    r.trad = {};
    r.ref = {};
  }

  write_file(root / "sweep.csv", [&](std::ostream& o) {
    o << "scenario,scheme,K,N,rms,median_iters\n";
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& r = results[c];
      o << scenario_name(sc.kind) << ',' << scheme_name(cells[c].scheme) << ',' << cells[c].steps << ','
        << cells[c].n << ',' << (r.ok ? num(r.rms) : "nan") << ',' << (r.ok ? num(r.median_iters) : "nan") << '\n';
    }
  });
  write_file(root / "cells.csv", [&](std::ostream& o) {
    o << "scheme,K,N,ok,rms,rms_time,rms_data,output_rel_rms,median_iters,mean_iters,trad_mean_iters,"
         "nonconverged,monotone,max_kirchhoff,early_error,late_error\n";
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& r = results[c];
      o << scheme_name(cells[c].scheme) << ',' << cells[c].steps << ',' << cells[c].n << ',' << (r.ok ? 1 : 0) << ','
        << num(r.rms) << ',' << num(r.rms_time) << ',' << num(r.rms_data) << ',' << num(r.output_rel_rms) << ','
        << num(r.median_iters) << ',' << num(r.mean_iters) << ',' << num(r.trad_mean_iters) << ',' << r.nonconverged
        << ',' << (r.monotone ? 1 : 0) << ',' << num(r.max_kirchhoff) << ',' << num(r.early_error) << ','
        << num(r.late_error) << '\n';
    }
  });

  std::ostringstream report;
  report << "scenario " << scenario_name(sc.kind) << "\n";
  bool failed = false;
  for (Scheme s : spec.schemes) {
    for (int k : ks) {
      std::vector<ConvergencePoint> pts;
      std::vector<std::size_t> idx;
      for (std::size_t c = 0; c < cells.size(); ++c)
        if (cells[c].scheme == s && cells[c].steps == k) {
          failed = failed || !results[c].ok;
          if (results[c].ok) {
            pts.push_back({static_cast<double>(cells[c].n), results[c].rms});
            idx.push_back(c);
          }
        }
      const std::string tag = std::string(scheme_name(s)) + "_K" + std::to_string(k);
      write_file(root / ("slope_" + tag + ".csv"), [&](std::ostream& o) {
        o << "N,rms,slope_window\n";
        for (std::size_t p = 0; p < pts.size(); ++p) {
          o << num(pts[p].n) << ',' << num(pts[p].rms) << ',';
          // Least-squares slope over this point and the two before it.
          if (p >= 2) o << num(convergence_slope(std::span(pts).subspan(p - 2, 3)));
          o << '\n';
        }
      });
      report << "\n" << tag << ":\n";
      if (pts.size() >= 3) report << "  slope of log10 rms over log10 N: " << convergence_slope(pts) << "\n";
      bool monotone = true;
      for (std::size_t p = 1; p < pts.size(); ++p) monotone = monotone && pts[p].rms <= pts[p - 1].rms;
      report << "  rms non-increasing in N: " << (monotone ? "yes" : "no") << "\n";
      if (!idx.empty()) report << "  traditional solver rms at this K: " << results[idx.front()].rms_time << "\n";
      for (std::size_t c : idx) {
        const auto& r = results[c];
        report << "  N=" << cells[c].n << " rms=" << r.rms << " (time " << r.rms_time << ", data " << r.rms_data
               << ") output_rel_rms=" << r.output_rel_rms << " median_iters=" << r.median_iters
               << " nonconverged=" << r.nonconverged << " monotone_em=" << (r.monotone ? "yes" : "no")
               << " max_kirchhoff=" << r.max_kirchhoff << "\n";
        if (sc.nonlinear_until > 0.0)
          report << "    mean eps2 for t < " << sc.nonlinear_until << ": " << r.early_error << ", after: " << r.late_error
                 << (r.early_error > r.late_error ? "  (larger in the strongly nonlinear region)" : "") << "\n";
      }
    }
  }
  write_file(root / "report.txt", [&](std::ostream& o) { o << report.str(); });
  log << "wrote " << (root / "sweep.csv").string() << " and report.txt\n";
  return failed ? kExitSolver : kExitOk;
}

std::string_view version_string() { return "ddmna 1.0.0"; }

int run_cli(int argc, char** argv) {
  CLI::App app{"Transient circuit simulation with model-based and data-driven MNA solvers", "ddmna"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Simulate a netlist");
  std::string run_config, netlist, solver, scheme, weights, out;
  int steps = 0, max_iters = 0;
  double t_end = 0.0, tol = 0.0;
  std::vector<std::string> data, sets;
  run->add_option("--config", run_config, "Key-value config file");
  run->add_option("--netlist", netlist, "Netlist file");
  run->add_option("--solver", solver, "traditional or data-driven");
  run->add_option("--scheme", scheme, "backward-euler (be) or trapezoidal (tr)");
  run->add_option("--steps", steps, "Number of time steps K");
  run->add_option("--t-end", t_end, "End time in seconds");
  run->add_option("--tol", tol, "Relative energy-mismatch tolerance");
  run->add_option("--max-iters", max_iters, "Iteration cap per step");
  run->add_option("--weights", weights, "constant or local-tangent");
  run->add_option("--data", data, "ELEMENT=measurements.csv (repeatable)");
  run->add_option("--set", sets, "section.key=value override (repeatable)");
  run->add_option("--out", out, "Output directory");

  // gen
  auto* gen = app.add_subcommand("gen", "Sample a model into a measurement CSV");
  std::string model = "shockley", spacing = "uniform", gen_out = "-", v_range, i_range, q_range, psi_range;
  double n = 1000, value = 1.0, i_s = 2.52e-9, n_ideality = 1.752, v_t = 25.85e-3, rd = 0.0, c0 = 10e-6,
         c_inf = 2e-6, v0 = 1.0;
  gen->add_option("--model", model, "linear-g, linear-c, linear-l, mlcc or shockley");
  gen->add_option("--value", value, "Coefficient of a linear model");
  gen->add_option("--is", i_s, "Diode saturation current");
  gen->add_option("--n-ideality", n_ideality, "Diode ideality factor");
  gen->add_option("--vt", v_t, "Thermal voltage");
  gen->add_option("--rd", rd, "Diode series resistance");
  gen->add_option("--c0", c0, "MLCC zero-bias capacitance");
  gen->add_option("--cinf", c_inf, "MLCC high-bias capacitance");
  gen->add_option("--v0", v0, "MLCC knee voltage");
  gen->add_option("--v-range", v_range, "lo:hi of the voltage (G and C)");
  gen->add_option("--i-range", i_range, "lo:hi of the current (G and L)");
  gen->add_option("--q-range", q_range, "lo:hi of the charge (C)");
  gen->add_option("--psi-range", psi_range, "lo:hi of the flux (L)");
  gen->add_option("--n", n, "Number of samples");
  gen->add_option("--spacing", spacing, "uniform, log or arc");
  gen->add_option("--out", gen_out, "Output CSV (- for stdout)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Sweep a built-in scenario over N, schemes and step counts");
  std::string exp_config, scenario, schemes, exp_steps, n_list, exp_out;
  int jobs = -1;
  double margin = 0.0;
  std::vector<std::string> exp_sets;
  exp->add_option("scenario", scenario, "rc-linear, rc-nonlinear or rectifier");
  exp->add_option("--config", exp_config, "Key-value config file");
  exp->add_option("--schemes", schemes, "Comma list, e.g. be,tr");
  exp->add_option("--steps", exp_steps, "Comma list of K");
  exp->add_option("--n", n_list, "Decade range lo:hi or comma list");
  exp->add_option("--margin", margin, "Envelope margin for the datasets");
  exp->add_option("--jobs", jobs, "Parallel cells (0 = all cores)");
  exp->add_option("--set", exp_sets, "section.key=value override (repeatable)");
  exp->add_option("--out", exp_out, "Output directory");

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto apply_sets = [](ConfigFile& cfg, const std::vector<std::string>& kv) {
    for (const auto& s : kv) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected section.key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
  };

  try {
    if (app.got_subcommand("version")) {
      std::cout << version_string() << '\n';
      return kExitOk;
    }
    if (app.got_subcommand(run)) {
      ConfigFile cfg = run_config.empty() ? ConfigFile{} : ConfigFile::load(run_config);
      if (!netlist.empty()) cfg.set("run.netlist", netlist);
      if (!solver.empty()) cfg.set("run.solver", solver);
      if (!scheme.empty()) cfg.set("transient.scheme", scheme);
      if (run->count("--steps")) cfg.set("transient.steps", std::to_string(steps));
      if (run->count("--t-end")) cfg.set("transient.t_end", num(t_end));
      if (run->count("--tol")) cfg.set("dd.tol_em", num(tol));
      if (run->count("--max-iters")) cfg.set("dd.max_iters", std::to_string(max_iters));
      if (!weights.empty()) cfg.set("dd.weights", weights);
      if (!out.empty()) cfg.set("run.out", out);
      for (const auto& d : data) {
        const auto eq = d.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--data: expected ELEMENT=path, got '" + d + "'");
        cfg.set("data." + d.substr(0, eq) + ".file", d.substr(eq + 1));
      }
      apply_sets(cfg, sets);
      const RunConfig rc = RunConfig::from(cfg);
      rc.validate();
      return cmd_run(rc, std::cerr);
    }
    if (app.got_subcommand(gen)) {
      GenerateSpec g;
      const auto m = lower(model);
      if (m == "linear-g") g.model = LinearModel{LinearKind::Conductance, value}, g.kind = PairKind::G;
      else if (m == "linear-c") g.model = LinearModel{LinearKind::Capacitance, value}, g.kind = PairKind::C;
      else if (m == "linear-l") g.model = LinearModel{LinearKind::Inductance, value}, g.kind = PairKind::L;
      else if (m == "mlcc") g.model = MlccCapacitorModel{c0, c_inf, v0}, g.kind = PairKind::C;
      else if (m == "shockley") g.model = ShockleyDiodeModel{i_s, n_ideality, v_t, rd}, g.kind = PairKind::G;
      else throw ConfigError("--model: expected linear-g, linear-c, linear-l, mlcc or shockley, got '" + model + "'");

      // The range option names the coordinate that is gridded.
      const std::string a_range = g.kind == PairKind::L ? i_range : v_range;
      const std::string b_range = g.kind == PairKind::G ? i_range : g.kind == PairKind::C ? q_range : psi_range;
      const std::string other = g.kind == PairKind::G ? q_range + psi_range
                                : g.kind == PairKind::C ? i_range + psi_range
                                                        : v_range + q_range;
      if (!other.empty()) throw ConfigError("gen: range option does not apply to this model");
      if (a_range.empty() == b_range.empty()) throw ConfigError("gen: give exactly one range option");
      g.plan.drive = a_range.empty() ? Drive::B : Drive::A;
      std::tie(g.plan.lo, g.plan.hi) = parse_range(a_range.empty() ? b_range : a_range, "gen range");
      if (!(n >= 1.0) || n != std::floor(n)) throw ConfigError("--n: expected a positive integer");
      g.plan.count = static_cast<std::size_t>(n);
      g.plan.spacing = parse_spacing(spacing, "--spacing");
      g.out = gen_out;
      return cmd_generate(g, std::cerr);
    }
    if (app.got_subcommand(exp)) {
      ConfigFile cfg = exp_config.empty() ? ConfigFile{} : ConfigFile::load(exp_config);
      if (!scenario.empty()) cfg.set("experiment.scenario", scenario);
      if (!schemes.empty()) cfg.set("experiment.schemes", schemes);
      if (!exp_steps.empty()) cfg.set("experiment.steps", exp_steps);
      if (!n_list.empty()) cfg.set("experiment.n", n_list);
      if (exp->count("--margin")) cfg.set("experiment.margin", num(margin));
      if (jobs >= 0) cfg.set("experiment.jobs", std::to_string(jobs));
      if (!exp_out.empty()) cfg.set("experiment.out", exp_out);
      apply_sets(cfg, exp_sets);
      if (!cfg.has("experiment.scenario")) throw ConfigError("experiment: scenario missing");
      return cmd_experiment(ExperimentSpec::from(cfg), std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TopologyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitUsage;
}

} // namespace ddmna
