#include "ddmna/bindings.hpp"
#include "ddmna/error.hpp"
#include "ddmna/metrics.hpp"
#include "ddmna/reference.hpp"
#include "ddmna/scenarios.hpp"

#include <doctest.h>

#include <cmath>

using namespace ddmna;

namespace {

const CircuitGraph& rc_graph() {
  static const CircuitGraph g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1e3\nC1 2 0 1e-6");
  return g;
}

// Trace with the capacitor pair set per step.
TransientTrace c_trace(std::vector<Pair> pairs) {
  TransientTrace t;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    CircuitState s = CircuitState::zero(rc_graph());
    s.v_c(0) = pairs[k].a;
    s.q_c(0) = pairs[k].b;
    t.times.push_back(1e-3 * static_cast<double>(k));
    t.states.push_back(s);
  }
  return t;
}

const ErrorTarget kC{BranchClass::C, 0, LinearModel{LinearKind::Capacitance, 1e-6}};

} // namespace

TEST_CASE("energy mismatch error") {
  const auto ref = c_trace({{0, 0}, {1, 1e-6}, {2, 2e-6}});
  for (double v : energy_mismatch_error(ref, ref, kC).values) CHECK(v == 0.0);
  const auto off = c_trace({{0, 0}, {1.001, 1e-6}, {2, 2e-6}});
  const auto e = energy_mismatch_error(off, ref, kC);
  CHECK(e.values[1] == doctest::Approx(0.5 * 1e-6 * 1e-6));
  CHECK(e.values[0] == 0.0);
  CHECK(e.times == ref.times);
}

TEST_CASE("rms error") {
  const auto ref = c_trace({{1, 0}, {2, 0}});
  CHECK(rms_error(ref, ref, kC) == 0.0);
  const double delta = 0.03;
  const auto off = c_trace({{1 + delta, 0}, {2 * (1 + delta), 0}});
  CHECK(rms_error(off, ref, kC) == doctest::Approx(delta));

  // Doubling every squared error scales the rms by sqrt(2).
  const auto ref2 = c_trace({{1, 1e-6}, {2, 2e-6}});
  const auto a = c_trace({{1.1, 1e-6}, {2, 2.2e-6}});
  const auto b = c_trace({{1 + 0.1 * std::sqrt(2.0), 1e-6}, {2, 2e-6 + 0.2e-6 * std::sqrt(2.0)}});
  CHECK(rms_error(b, ref2, kC) == doctest::Approx(std::sqrt(2.0) * rms_error(a, ref2, kC)));

  CHECK_THROWS_AS(rms_error(ref, c_trace({{0, 0}, {0, 0}}), kC), DomainError);
  CHECK_THROWS_AS(rms_error(ref, c_trace({{0, 0}}), kC), DomainError);
}

TEST_CASE("nonlinear targets use the true tangent at the reference state") {
  const MlccCapacitorModel m{10e-6, 2e-6, 1.0};
  const ErrorTarget t{BranchClass::C, 0, m};
  const auto ref = c_trace({{3.0, mlcc_charge(m, 3.0)}});
  const auto off = c_trace({{3.01, mlcc_charge(m, 3.0)}});
  CHECK(energy_mismatch_error(off, ref, t).values[0] ==
        doctest::Approx(0.5 * mlcc_capacitance(m, 3.0) * 1e-4));
}

TEST_CASE("error decomposition") {
  const auto ref = c_trace({{1, 1e-6}, {2, 2e-6}, {3, 3e-6}});
  const auto trad = c_trace({{1.01, 1e-6}, {2, 2.01e-6}, {3, 3e-6}});
  const auto same = decompose_error(trad, trad, ref, kC);
  CHECK(same.data == 0.0);
  CHECK(same.total == doctest::Approx(same.time));
  const auto exact = decompose_error(trad, ref, ref, kC);
  CHECK(exact.time == 0.0);
  const auto dd = c_trace({{0.99, 1.02e-6}, {2.03, 2e-6}, {3, 2.9e-6}});
  const auto d = decompose_error(dd, trad, ref, kC);
  CHECK(d.triangle_holds);
  CHECK(d.total <= d.time + d.data + 1e-15);
}

TEST_CASE("convergence slope") {
  std::vector<ConvergencePoint> inv{{1e2, 1e-2}, {1e3, 1e-3}, {1e4, 1e-4}, {1e5, 1e-5}};
  CHECK(convergence_slope(inv) == doctest::Approx(-1.0));
  std::vector<ConvergencePoint> flat{{1e2, 3e-3}, {1e3, 3e-3}, {1e4, 3e-3}};
  CHECK(convergence_slope(flat) == doctest::Approx(0.0));
  auto scaled = inv;
  for (auto& p : scaled) p.rms *= 17.0;
  CHECK(convergence_slope(scaled) == doctest::Approx(convergence_slope(inv)));
  CHECK_THROWS_AS(convergence_slope(std::span(inv).first(2)), DomainError);
  std::vector<ConvergencePoint> dup{{1e2, 1}, {1e2, 2}, {1e3, 1}};
  CHECK_THROWS_AS(convergence_slope(dup), DomainError);
}

TEST_CASE("relative rms") {
  const std::vector<double> ref{1, 2, 3}, x{1.1, 2.2, 3.3};
  CHECK(relative_rms(x, ref) == doctest::Approx(0.1));
  CHECK_THROWS_AS(relative_rms(x, std::vector<double>{0, 0, 0}), DomainError);
}

TEST_CASE("small datasets give larger errors at most steps") {
  const Scenario sc = make_scenario(ScenarioKind::RcLinear);
  CellSpec few, many;
  few.n = 100;
  many.n = 100000;
  const auto a = run_cell(sc, few);
  const auto b = run_cell(sc, many);
  REQUIRE(a.ok);
  REQUIRE(b.ok);
  std::size_t larger = 0;
  for (std::size_t k = 1; k < a.error.values.size(); ++k) larger += a.error.values[k] >= b.error.values[k] ? 1 : 0;
  CHECK(static_cast<double>(larger) >= 0.9 * static_cast<double>(a.error.values.size() - 1));
  CHECK(a.rms > b.rms);
  const auto d = decompose_error(b.dd, b.trad, b.ref, {BranchClass::C, 0, LinearModel{LinearKind::Capacitance, 1e-6}});
  CHECK(d.triangle_holds);
}
