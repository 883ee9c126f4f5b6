#include "ddmna/bindings.hpp"
#include "ddmna/dd_solver.hpp"
#include "ddmna/error.hpp"
#include "ddmna/reference.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ddmna;

namespace {

MeasurementSet g_set(std::vector<Pair> pairs) {
  MeasurementSet s;
  s.kind = PairKind::G;
  s.pairs = std::move(pairs);
  return s;
}

WeightSet weights(std::vector<double> g, std::vector<double> c = {}, std::vector<double> l = {}) {
  WeightSet w;
  w.g = Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  w.c = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  w.l = Eigen::Map<Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size()));
  return w;
}

Eigen::VectorXd one(double x) { return Eigen::VectorXd::Constant(1, x); }

// V = 1 across a single data-driven resistor.
struct OneNode {
  CircuitGraph graph = parse_netlist("V1 1 0 DC 1\nR1 1 0 1\n");
  CircuitBindings bindings;

  explicit OneNode(std::vector<Pair> pairs) {
    bindings = bind_circuit(graph);
    bind_data(graph, bindings, "R1", g_set(std::move(pairs)));
  }
};

const std::vector<Pair> kThree{{0.5, 0.5}, {1, 2}, {2, 4}};

const char* kMixed = "V1 1 0 SIN 0 1 1e3\nR1 1 2 100\nC1 2 0 1e-6\nL1 2 3 1e-3\nR2 3 0 50\nI1 0 2 DC 1e-3\n";

} // namespace

TEST_CASE("projection system of the one-node circuit") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 0 1\n");
  const auto inc = build_incidence(g);
  CircuitState target = CircuitState::zero(g);
  target.v_g(0) = 0.3;
  target.i_g(0) = 0.7;
  const auto sys = assemble_projection_system(inc, weights({2.0}), target, HistoryState::zero(g), one(1.0),
                                              Eigen::VectorXd(0), StepRule{});
  REQUIRE(sys.layout.size() == 5); // phi, i_G, i_V, eta, lambda_V
  Eigen::MatrixXd m(5, 5);
  m << 2, 0, 0, 0, -1,  //
      0, 0.5, 0, -1, 0, //
      0, 0, 0, -1, 0,   //
      0, 1, 1, 0, 0,    //
      1, 0, 0, 0, 0;
  CHECK(sys.matrix.isApprox(m));
  Eigen::VectorXd b(5);
  b << 2 * 0.3, 0.5 * 0.7, 0, 0, 1;
  CHECK(sys.rhs.isApprox(b));
}

TEST_CASE("projection system size") {
  const auto g = parse_netlist(kMixed);
  const auto inc = build_incidence(g);
  const auto layout = ProjectionLayout::of(inc);
  // 2(n-1) + n_G + n_C + 3 n_L + 2 n_V
  CHECK(layout.size() == 2 * 3 + 2 + 1 + 3 * 1 + 2 * 1);
}

TEST_CASE("one-node projection keeps the current and pins the voltage") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 0 1\n");
  const auto inc = build_incidence(g);
  for (auto [v, i] : {std::pair{0.3, 0.7}, {5.0, -2.0}, {1.0, 0.0}}) {
    CircuitState target = CircuitState::zero(g);
    target.v_g(0) = v;
    target.i_g(0) = i;
    const auto s = project_to_kirchhoff(inc, target, weights({1.0}), HistoryState::zero(g), one(1.0),
                                        Eigen::VectorXd(0), StepRule{});
    CHECK(s.v_g(0) == doctest::Approx(1.0));
    CHECK(s.i_g(0) == doctest::Approx(i));
    CHECK(s.i_v(0) == doctest::Approx(-i));
  }
}

TEST_CASE("one-node projection under a common weight scale") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 0 1\n");
  const auto inc = build_incidence(g);
  CircuitState target = CircuitState::zero(g);
  target.v_g(0) = 0.3;
  target.i_g(0) = 0.7;
  const auto solve = [&](double alpha) {
    const KirchhoffProjector p(inc, weights({2.0 * alpha}), StepRule{});
    return p.solve(p.rhs(target, HistoryState::zero(g), one(1.0), Eigen::VectorXd(0)));
  };
  const Eigen::VectorXd x1 = solve(1.0), x10 = solve(10.0);
  const auto lay = ProjectionLayout::of(inc);
  CHECK(x10.head(lay.eta()).isApprox(x1.head(lay.eta())));
  CHECK(x10(lay.lambda_v()) == doctest::Approx(10.0 * x1(lay.lambda_v())));
  CHECK(x10(lay.eta()) == doctest::Approx(0.0));
}

TEST_CASE("homogeneous projection is zero") {
  const auto g = parse_netlist("V1 1 0 DC 0\nR1 1 2 100\nC1 2 0 1e-6\nL1 2 3 1e-3\nR2 3 0 50\n");
  const auto inc = build_incidence(g);
  const auto s = project_to_kirchhoff(inc, CircuitState::zero(g), weights({1e-2, 2e-2}, {1e-6}, {1e-3}),
                                      HistoryState::zero(g), one(0.0), Eigen::VectorXd(0),
                                      StepRule{Scheme::BackwardEuler, 1e-5});
  CHECK(s.phi.isZero(1e-15));
  CHECK(s.i_g.isZero(1e-15));
  CHECK(s.q_c.isZero(1e-15));
  CHECK(s.i_l.isZero(1e-15));
}

TEST_CASE("Kirchhoff projection is idempotent, feasible and optimal") {
  const auto g = parse_netlist(kMixed);
  const auto inc = build_incidence(g);
  const WeightSet w = weights({1e-2, 2e-2}, {1e-6}, {1e-3});
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  HistoryState h = HistoryState::zero(g);
  h.q = one(0.3e-6);
  h.psi = one(2e-6);
  h.q_dot = one(1e-4);
  h.psi_dot = one(0.1);
  for (Scheme scheme : {Scheme::BackwardEuler, Scheme::Trapezoidal}) {
    const StepRule rule{scheme, 1e-5};
    const double t = 2e-4;
    const KirchhoffProjector p(inc, w, rule);
    const auto vs = source_voltages(g, t);
    const auto is = source_currents(g, t);
    auto random_state = [&] {
      CircuitState s = CircuitState::zero(g);
      for (auto* v : {&s.v_g, &s.v_c, &s.phi}) v->setRandom();
      s.i_g = 1e-2 * Eigen::VectorXd::NullaryExpr(2, [&] { return n01(rng); });
      s.q_c = one(1e-6 * n01(rng));
      s.i_l = one(1e-3 * n01(rng));
      s.psi_l = one(1e-6 * n01(rng));
      return s;
    };
    for (int trial = 0; trial < 5; ++trial) {
      const CircuitState target = random_state();
      const CircuitState proj = p.project(target, h, vs, is);
      CHECK(kirchhoff_residual(g, inc, proj, h, rule, t).max() <= 1e-10);
      const CircuitState again = p.project(proj, h, vs, is);
      CHECK(energy_mismatch(g, again, proj, w) <= 1e-20);
      const double best = energy_mismatch(g, proj, target, w);
      for (int k = 0; k < 100; ++k) {
        // Random feasible competitors: projections of perturbed targets.
        const CircuitState other = p.project(random_state(), h, vs, is);
        CHECK(best <= energy_mismatch(g, other, target, w) * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("projection to data") {
  SUBCASE("known linear elements on their lines stay put") {
    const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1e3\nC1 2 0 1e-6");
    const DataDrivenSolver solver(g, bind_circuit(g));
    CircuitState s = CircuitState::zero(g);
    s.v_g(0) = 0.4;
    s.i_g(0) = 0.4e-3;
    s.v_c(0) = 0.6;
    s.q_c(0) = 0.6e-6;
    const CircuitState out = solver.project_to_data(s, solver.weights());
    CHECK(out.i_g(0) == doctest::Approx(s.i_g(0)));
    CHECK(out.v_c(0) == doctest::Approx(s.v_c(0)));
    CHECK(out.q_c(0) == doctest::Approx(s.q_c(0)));
  }
  SUBCASE("member query selects the member") {
    const OneNode c(kThree);
    const DataDrivenSolver solver(c.graph, c.bindings, {}, weights({1.0}));
    CircuitState s = CircuitState::zero(c.graph);
    s.v_g(0) = 1.0;
    s.i_g(0) = 2.0;
    std::vector<int> sel;
    const CircuitState out = solver.project_to_data(s, solver.weights(), &sel);
    CHECK(sel == std::vector<int>{1});
    CHECK(energy_mismatch(c.graph, s, out, solver.weights()) == 0.0);
  }
  SUBCASE("elements are projected independently") {
    const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1\nR2 2 0 1\n");
    auto b1 = bind_circuit(g), b2 = bind_circuit(g);
    bind_data(g, b1, "R1", g_set({{0, 0}, {1, 1}}));
    bind_data(g, b1, "R2", g_set({{0, 0}, {0.5, 0.5}}));
    bind_data(g, b2, "R1", g_set({{0, 0}, {3, 2}, {0.2, 0.1}}));
    bind_data(g, b2, "R2", g_set({{0, 0}, {0.5, 0.5}}));
    const WeightSet w = weights({1.0, 1.0});
    const DataDrivenSolver s1(g, b1, {}, w), s2(g, b2, {}, w);
    CircuitState q = CircuitState::zero(g);
    q.v_g << 0.9, 0.45;
    q.i_g << 0.8, 0.4;
    CHECK(s1.project_to_data(q, w).v_g(1) == s2.project_to_data(q, w).v_g(1));
    CHECK(s1.project_to_data(q, w).i_g(1) == s2.project_to_data(q, w).i_g(1));
  }
}

TEST_CASE("energy mismatch") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1\nR2 2 0 1\n");
  CircuitState a = CircuitState::zero(g), b = CircuitState::zero(g);
  CHECK(energy_mismatch(g, a, a, weights({2.0, 3.0})) == 0.0);
  b.v_g(0) = 1.0;
  b.i_g(0) = 2.0;
  CHECK(energy_mismatch(g, a, b, weights({2.0, 3.0})) == doctest::Approx(2.0));
  b.v_g(1) = 0.5;
  b.i_g(1) = -1.0;
  const double second = weighted_pair_distance({0, 0}, {0.5, -1.0}, 3.0);
  CHECK(energy_mismatch(g, a, b, weights({2.0, 3.0})) == doctest::Approx(2.0 + second));
}

TEST_CASE("one-node data-driven step finds the consistent measurement") {
  const OneNode c(kThree);
  const DataDrivenSolver solver(c.graph, c.bindings, {}, weights({1.0}));
  const auto r = solver.solve_step(solver.seed_state(), HistoryState::zero(c.graph), StepRule{}, 0.0);
  CHECK(r.state.v_g(0) == doctest::Approx(1.0));
  CHECK(r.state.i_g(0) == doctest::Approx(2.0));
  CHECK(r.trace.final_value == 0.0);
  CHECK(r.trace.converged);

  const auto brute = brute_force_timestep(solver, HistoryState::zero(c.graph), StepRule{}, 0.0);
  CHECK(brute.minimum == 0.0);
  CHECK(brute.selection == std::vector<std::size_t>{1});
  CHECK(brute.candidates == 3);
  const std::vector<double> expected{0.125, 0.0, 0.5};
  const KirchhoffProjector p(solver.incidence(), solver.weights(), StepRule{});
  for (std::size_t k = 0; k < 3; ++k) {
    const CircuitState data = solver.data_state({k});
    const CircuitState feas = p.project(data, HistoryState::zero(c.graph), one(1.0), Eigen::VectorXd(0));
    CHECK(energy_mismatch(c.graph, feas, data, solver.weights()) == doctest::Approx(expected[k]));
  }
}

TEST_CASE("starting at the optimum repeats the selection at once") {
  const OneNode c(kThree);
  const DataDrivenSolver solver(c.graph, c.bindings, {}, weights({1.0}));
  const auto r = solver.solve_step(solver.data_state({1}), HistoryState::zero(c.graph), StepRule{}, 0.0);
  CHECK(r.trace.iterations == 1);
  CHECK(r.trace.selections.front() == std::vector<int>{1});
}

TEST_CASE("single-measurement datasets leave no choice") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1e3\nC1 2 0 1e-6");
  auto b = bind_circuit(g);
  bind_data(g, b, "R1", g_set({{0.7, 0.6e-3}}));
  MeasurementSet c;
  c.kind = PairKind::C;
  c.pairs = {{0.3, 0.25e-6}};
  bind_data(g, b, "C1", c);
  const DataDrivenSolver solver(g, b);
  const StepRule rule{Scheme::BackwardEuler, 5e-6};
  const auto h = HistoryState::zero(g);
  const auto r = solver.solve_step(solver.seed_state(), h, rule, rule.h);
  const auto brute = brute_force_timestep(solver, h, rule, rule.h);
  CHECK(brute.candidates == 1);
  CHECK(r.trace.final_value == doctest::Approx(brute.minimum).epsilon(1e-12));
  CHECK(r.state.phi.isApprox(brute.state.phi));
}

TEST_CASE("exhaustive search refuses known elements and oversized products") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1e3\nC1 2 0 1e-6");
  auto b = bind_circuit(g);
  bind_data(g, b, "R1", g_set({{0, 0}, {1, 1e-3}}));
  const DataDrivenSolver mixed(g, b);
  CHECK_THROWS_AS(brute_force_timestep(mixed, HistoryState::zero(g), StepRule{}, 0.0), ConfigError);

  std::vector<Pair> many;
  for (int k = 0; k < 2000; ++k) many.push_back({k * 1e-3, k * 1e-6});
  MeasurementSet cs;
  cs.kind = PairKind::C;
  cs.pairs = many;
  bind_data(g, b, "R1", g_set(many));
  bind_data(g, b, "C1", cs);
  const DataDrivenSolver big(g, b);
  CHECK_THROWS_AS(brute_force_timestep(big, HistoryState::zero(g), StepRule{}, 0.0, 1000000), ConfigError);
}

// Every other trajectory point competes with the exact one at each step.
TEST_CASE("measurements on the exact trajectory are recovered") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1e3\nC1 2 0 1e-6");
  TransientConfig tc;
  tc.scheme = Scheme::BackwardEuler;
  tc.steps = 100;
  const auto trad = run_transient_traditional(g, bind_circuit(g), tc);
  MeasurementSet r, c;
  r.kind = PairKind::G;
  c.kind = PairKind::C;
  for (const auto& s : trad.states) {
    r.pairs.push_back({s.v_g(0), s.i_g(0)});
    c.pairs.push_back({s.v_c(0), s.q_c(0)});
  }
  remove_duplicates(r);
  remove_duplicates(c);
  auto b = bind_circuit(g);
  bind_data(g, b, "R1", r);
  bind_data(g, b, "C1", c);
  const auto dd = run_transient_dd(g, b, tc);
  for (std::size_t k = 1; k < dd.size(); ++k) {
    CAPTURE(k);
    CHECK(dd.diagnostics[k].final_value <= 1e-20);
    CHECK(dd.states[k].v_c(0) == doctest::Approx(trad.states[k].v_c(0)).epsilon(1e-9));
  }
}

TEST_CASE("known linear circuit reproduces the traditional trace") {
  const auto g = parse_netlist("V1 1 0 SIN 0 1 200\nR1 1 2 1e3\nC1 2 0 1e-6\nL1 2 3 10e-3\nR2 3 0 100");
  for (Scheme scheme : {Scheme::BackwardEuler, Scheme::Trapezoidal}) {
    TransientConfig tc;
    tc.scheme = scheme;
    tc.steps = 200;
    const auto trad = run_transient_traditional(g, bind_circuit(g), tc);
    const auto data = run_transient_dd(g, bind_circuit(g), tc);
    double scale = 0.0, worst = 0.0;
    for (std::size_t k = 0; k < trad.size(); ++k) {
      scale = std::max(scale, trad.states[k].phi.cwiseAbs().maxCoeff());
      worst = std::max(worst, (trad.states[k].phi - data.states[k].phi).cwiseAbs().maxCoeff());
    }
    CAPTURE(scheme_name(scheme));
    CHECK(worst / scale <= 1e-9);
  }
}

TEST_CASE("the traditional solution is a fixed point of the plain alternation") {
  const auto g = parse_netlist("V1 1 0 SIN 0 1 200\nR1 1 2 1e3\nC1 2 0 1e-6\nL1 2 3 10e-3\nR2 3 0 100");
  TransientConfig tc;
  tc.scheme = Scheme::BackwardEuler;
  tc.steps = 50;
  const auto trad = run_transient_traditional(g, bind_circuit(g), tc);
  DDConfig dd;
  dd.eliminate_known = false;
  const DataDrivenSolver solver(g, bind_circuit(g), dd);
  const StepRule rule{Scheme::BackwardEuler, tc.step_size()};
  HistoryState h = advance_history(HistoryState::zero(g), trad.states[0], rule);
  for (std::size_t k = 1; k < trad.size(); ++k) {
    const auto r = solver.solve_step(trad.states[k], h, rule, trad.times[k]);
    CHECK(r.trace.final_value <= 1e-20);
    CHECK((r.state.phi - trad.states[k].phi).cwiseAbs().maxCoeff() <= 1e-9);
    h = advance_history(h, trad.states[k], rule);
  }
}

TEST_CASE("mismatch never increases inside a step and accepted states are feasible") {
  const auto g = parse_netlist("V1 1 0 SIN 0 5 100\nD1 1 2 MODEL shockley(2.52e-9,1.752,25.85e-3,10e-3)\n"
                               "C1 2 0 100e-6\nRL 2 0 1e3\n");
  TransientConfig tc;
  tc.steps = 100;
  tc.t_end = 20e-3;
  const auto trad = run_transient_traditional(g, bind_circuit(g), tc);
  const auto env = operating_envelope(g, trad, 1.2);
  SamplingPlan plan;
  plan.lo = env.g_a[0].lo;
  plan.hi = std::min(env.g_a[0].hi, composite_diode_voltage({2.52e-9, 1.752, 25.85e-3, 10e-3}, env.g_b[0].hi));
  plan.count = 2000;
  plan.spacing = Spacing::ArcLength;
  auto b = bind_circuit(g);
  bind_data(g, b, "D1", generate_measurements(ShockleyDiodeModel{2.52e-9, 1.752, 25.85e-3, 10e-3}, PairKind::G, plan));
  const auto dd = run_transient_dd(g, b, tc);
  for (std::size_t k = 1; k < dd.size(); ++k) {
    const auto& h = dd.diagnostics[k].history;
    for (std::size_t p = 1; p < h.size(); ++p) CHECK(h[p] <= h[p - 1] + 1e-12 * h.front());
    CHECK(dd.diagnostics[k].kirchhoff <= 1e-10);
    CHECK(static_cast<int>(h.size()) == dd.diagnostics[k].iterations);
  }
}

TEST_CASE("local tangent weights run and keep feasibility") {
  const auto g = parse_netlist("V1 1 0 DC 10\nR1 1 2 200e3\nC1 2 0 MODEL mlcc(10e-6,2e-6,1)");
  TransientConfig tc;
  tc.steps = 100;
  tc.t_end = 1.0;
  SamplingPlan plan;
  plan.lo = -1.0;
  plan.hi = 12.0;
  plan.count = 5000;
  auto b = bind_circuit(g);
  bind_data(g, b, "C1", generate_measurements(MlccCapacitorModel{}, PairKind::C, plan));
  DDConfig dd;
  dd.weight_rule = ElementWeight::Rule::LocalTangent;
  const auto trace = run_transient_dd(g, b, tc, dd);
  for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace.diagnostics[k].kirchhoff <= 1e-10);
  CHECK(trace.states.back().v_c(0) > 5.0);
}

TEST_CASE("configuration validation") {
  DDConfig dd;
  dd.tol_em = 0.0;
  CHECK_THROWS_AS(dd.validate(), ConfigError);
  dd = {};
  dd.max_iters = 0;
  CHECK_THROWS_AS(dd.validate(), ConfigError);
  WeightSet w = weights({1.0, -1.0});
  CHECK_THROWS(w.validate());
}
