#include "ddmna/bindings.hpp"
#include "ddmna/dataset.hpp"
#include "ddmna/error.hpp"
#include "ddmna/kernels.hpp"
#include "ddmna/nn_index.hpp"
#include "ddmna/reference.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace ddmna;

namespace {

MeasurementSet make_set(PairKind kind, std::vector<Pair> pairs) {
  MeasurementSet s;
  s.kind = kind;
  s.pairs = std::move(pairs);
  return s;
}

std::vector<Pair> random_pairs(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Pair> out(n);
  for (auto& p : out) p = {u(rng), 3.0 * u(rng)};
  return out;
}

} // namespace

TEST_CASE("uniform samples of a conductance") {
  SamplingPlan plan;
  plan.lo = 0.0;
  plan.hi = 1.0;
  plan.count = 3;
  const auto set = generate_measurements(LinearModel{LinearKind::Conductance, 1e-3}, PairKind::G, plan);
  REQUIRE(set.size() == 3);
  CHECK(set.pairs[0] == Pair{0.0, 0.0});
  CHECK(set.pairs[1].a == 0.5);
  CHECK(set.pairs[1].b == doctest::Approx(0.5e-3));
  CHECK(set.pairs[2].a == 1.0);
  CHECK(set.pairs[2].b == doctest::Approx(1e-3));
}

TEST_CASE("single sample sits at the midpoint") {
  SamplingPlan plan;
  plan.lo = 2.0;
  plan.hi = 4.0;
  plan.count = 1;
  const auto set = generate_measurements(LinearModel{LinearKind::Capacitance, 2.0}, PairKind::C, plan);
  REQUIRE(set.size() == 1);
  CHECK(set.pairs[0] == Pair{3.0, 6.0});
}

TEST_CASE("diode samples gridded in current are consistent with the model") {
  const ShockleyDiodeModel d{2.52e-9, 1.752, 25.85e-3, 10e-3};
  SamplingPlan plan;
  plan.lo = 1e-9;
  plan.hi = 10.0;
  plan.count = 2000;
  plan.spacing = Spacing::LogSymmetric;
  plan.drive = Drive::B;
  const auto set = generate_measurements(d, PairKind::G, plan);
  CHECK(set.size() == 2000);
  CHECK(set.pairs.front().b == doctest::Approx(1e-9));
  CHECK(set.pairs.back().b == doctest::Approx(10.0));
  for (const auto& p : set.pairs) {
    const double v = composite_diode_voltage(d, p.b);
    CHECK(std::abs(p.a - v) <= 1e-12 * std::abs(v));
  }
}

TEST_CASE("arc-length samples cover the range with both ends") {
  const ShockleyDiodeModel d{2.52e-9, 1.752, 25.85e-3, 10e-3};
  SamplingPlan plan;
  plan.lo = -5.0;
  plan.hi = 0.9;
  plan.count = 500;
  plan.spacing = Spacing::ArcLength;
  const auto set = generate_measurements(d, PairKind::G, plan);
  CHECK(set.size() == 500);
  CHECK(set.pairs.front().a == doctest::Approx(-5.0));
  CHECK(set.pairs.back().a == doctest::Approx(0.9));
  for (std::size_t k = 1; k < set.size(); ++k) CHECK(set.pairs[k].a > set.pairs[k - 1].a);
}

TEST_CASE("sampling plan validation") {
  SamplingPlan plan;
  plan.count = 0;
  CHECK_THROWS_AS(plan.validate(), DomainError);
  plan.count = 5;
  plan.lo = plan.hi = 1.0;
  CHECK_THROWS_AS(plan.validate(), DomainError);
  const ShockleyDiodeModel d;
  SamplingPlan bad;
  bad.lo = -1.0;
  bad.hi = 1.0;
  bad.count = 10;
  bad.drive = Drive::B;
  CHECK_THROWS_AS(generate_measurements(d, PairKind::G, bad), DomainError);
}

TEST_CASE("weighted pair distance") {
  CHECK(weighted_pair_distance({1, 2}, {1, 2}, 3.0) == 0.0);
  CHECK(weighted_pair_distance({1, 2}, {0, 0}, 2.0) == doctest::Approx(2.0));
  const Pair p{0.3, -0.7}, q{1.1, 0.4};
  const double a = 0.5 * (p.a - q.a) * (p.a - q.a);
  const double b = 0.5 * (p.b - q.b) * (p.b - q.b);
  CHECK(weighted_pair_distance(p, q, 10.0) == doctest::Approx(10.0 * a + b / 10.0));
  CHECK(weighted_pair_distance(p, q, 1.0) == doctest::Approx(a + b));
}

TEST_CASE("nearest measurement") {
  const auto diag = make_set(PairKind::G, {{0, 0}, {1, 1}, {2, 2}});
  CHECK(nearest_measurement(diag, {1.1, 0.9}, 1.0).index == 1);
  const auto member = nearest_measurement(diag, {2, 2}, 1.0);
  CHECK(member.index == 2);
  CHECK(member.distance == 0.0);
  const auto tie = make_set(PairKind::G, {{0, 0}, {2, 0}});
  CHECK(nearest_measurement(tie, {1, 0}, 1.0).index == 0);
}

TEST_CASE("nearest measurement against every member on random sets") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto set = make_set(PairKind::G, random_pairs(300, rng));
    const Pair q = random_pairs(1, rng)[0];
    const double w = std::pow(10.0, std::uniform_real_distribution<double>(-2, 2)(rng));
    const auto best = nearest_measurement(set, q, w);
    for (const auto& p : set.pairs) CHECK(best.distance <= weighted_pair_distance(p, q, w));
    // Appending pairs farther than the best leaves the answer alone.
    auto grown = set;
    grown.pairs.push_back({q.a + 100.0, q.b});
    CHECK(nearest_measurement(grown, q, w).index == best.index);
  }
}

TEST_CASE("kd-tree agrees with the scan exactly") {
  std::mt19937_64 rng(11);
  const auto pairs = random_pairs(10000, rng);
  const NearestIndex index(pairs);
  const auto set = make_set(PairKind::G, pairs);
  const auto queries = random_pairs(1000, rng);
  for (double w : {1e-3, 1.0, 250.0}) {
    for (const auto& q : queries) {
      const auto a = index.nearest(q, w);
      const auto b = nearest_measurement(set, q, w);
      CHECK(a.index == b.index);
      CHECK(a.distance == b.distance);
    }
  }
  // Exact duplicates and ties still resolve to the lowest index.
  const std::vector<Pair> dup{{1, 1}, {0, 0}, {1, 1}, {2, 0}};
  const NearestIndex small(dup, 1);
  CHECK(small.nearest({1, 1}, 1.0).index == 0);
  CHECK(small.nearest({1, 0}, 1.0).index == 0); // three-way tie at 0.5
  CHECK(small.nearest({0.1, 0}, 1.0).index == 1);
}

TEST_CASE("k nearest are sorted and match a full sort") {
  std::mt19937_64 rng(3);
  const auto pairs = random_pairs(2000, rng);
  const NearestIndex index(pairs);
  const Pair q{0.1, 0.2};
  const auto knn = index.k_nearest(q, 2.0, 10);
  REQUIRE(knn.size() == 10);
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t k = 0; k < pairs.size(); ++k) all.push_back({weighted_pair_distance(pairs[k], q, 2.0), k});
  std::sort(all.begin(), all.end());
  for (std::size_t k = 0; k < 10; ++k) CHECK(knn[k].index == all[k].second);
}

TEST_CASE("serial and parallel kernels agree") {
  std::mt19937_64 rng(5);
  const auto pairs = random_pairs(5000, rng);
  const auto queries = random_pairs(200, rng);
  const NearestIndex index(pairs);
  const auto s = kernels::nearest_batch_serial(pairs, queries, 0.7);
  const auto p = kernels::nearest_batch_parallel(pairs, queries, 0.7);
  const auto t = kernels::nearest_batch_indexed(index, queries, 0.7);
  for (std::size_t k = 0; k < queries.size(); ++k) {
    CHECK(s[k].index == p[k].index);
    CHECK(s[k].index == t[k].index);
    CHECK(kernels::nearest_scan_parallel(pairs, queries[k], 0.7).index == s[k].index);
    CHECK(kernels::nearest_scan_serial(pairs, queries[k], 0.7).index == s[k].index);
  }
  auto f = [](std::size_t k) { return std::abs(static_cast<double>(k % 97) - 40.0); };
  const auto a = kernels::argmin_serial(100000, f);
  const auto b = kernels::argmin_parallel(100000, f);
  CHECK(a.index == 40);
  CHECK(b.index == a.index);
  CHECK(b.value == a.value);
}

TEST_CASE("local tangent weight") {
  std::vector<Pair> line;
  for (int k = 0; k < 50; ++k) line.push_back({0.1 * k, 0.3 * k});
  const auto set = make_set(PairKind::G, line);
  for (std::size_t k : {2u, 4u, 10u}) {
    const auto t = local_tangent_weight(set, {1.7, 2.0}, k, 1.0, 1e-9, 1e9);
    CHECK(t.value == doctest::Approx(3.0));
    CHECK_FALSE(t.degenerate);
  }

  const MlccCapacitorModel m{10e-6, 2e-6, 1.0};
  SamplingPlan plan;
  plan.lo = -10.0;
  plan.hi = 10.0;
  plan.count = 2001;
  const auto mlcc = generate_measurements(m, PairKind::C, plan);
  const auto t0 = local_tangent_weight(mlcc, {0.0, 0.0}, 10, chord_weight(mlcc), 1e-15, 1.0);
  CHECK(t0.value >= m.c_inf);
  CHECK(t0.value <= m.c0);
  CHECK(t0.value == doctest::Approx(m.c0).epsilon(1e-3));

  std::vector<Pair> flat;
  for (int k = 0; k < 10; ++k) flat.push_back({double(k), 1e-30 * k});
  const auto clamped = local_tangent_weight(make_set(PairKind::G, flat), {3, 0}, 4, 1.0, 1e-9, 1e9);
  CHECK(clamped.value == 1e-9);
  CHECK(clamped.clamped);

  const auto column = make_set(PairKind::G, {{1, 0}, {1, 1}, {1, 2}, {1, 3}});
  const auto deg = local_tangent_weight(column, {1, 1}, 3, 0.25, 1e-9, 1e9);
  CHECK(deg.degenerate);
  CHECK(deg.value == 0.25);
}

TEST_CASE("projection onto a known line") {
  const Pair p = project_known_linear(2.0, {1.0, 0.0});
  CHECK(p.a == doctest::Approx(0.5));
  CHECK(p.b == doctest::Approx(1.0));
  const Pair on{0.7, 1.4};
  const Pair same = project_known_linear(2.0, on);
  CHECK(same.a == doctest::Approx(on.a));
  CHECK(same.b == doctest::Approx(on.b));
  CHECK(project_known_linear(5.0, {0, 0}) == Pair{0, 0});
}

TEST_CASE("chord weight") {
  CHECK(chord_weight(make_set(PairKind::C, {{0, 0}, {2, 8}, {1, 1}})) == doctest::Approx(4.0));
}

TEST_CASE("range widening") {
  const Range r = widen({1.0, 1.0}, 1.2);
  CHECK(r.lo == doctest::Approx(0.8));
  CHECK(r.hi == doctest::Approx(1.2));
  const Range s = widen({0.0, 2.0}, 1.5);
  CHECK(s.lo == doctest::Approx(-0.5));
  CHECK(s.hi == doctest::Approx(2.5));
  const Range id = widen({-3.0, 7.0}, 1.0);
  CHECK(id.lo == -3.0);
  CHECK(id.hi == 7.0);
}

TEST_CASE("operating envelope of the RC charging curve") {
  const auto g = parse_netlist("V1 1 0 DC 1\nR1 1 2 1e3\nC1 2 0 1e-6");
  TransientConfig tc;
  tc.t_end = 5e-3;
  tc.steps = 200;
  const auto trace = run_transient_traditional(g, bind_circuit(g), tc);
  const auto exact = operating_envelope(g, trace, 1.0);
  CHECK(exact.c_a[0].lo <= 0.0);
  CHECK(exact.c_a[0].hi >= 1.0 - std::exp(-5.0) - 1e-4);
  CHECK(exact.c_b[0].hi == doctest::Approx(exact.c_a[0].hi * 1e-6));
  const auto wide = operating_envelope(g, trace, 1.2);
  CHECK(wide.c_a[0].lo < exact.c_a[0].lo);
  CHECK(wide.c_a[0].hi > exact.c_a[0].hi);
  CHECK_THROWS(operating_envelope(g, TransientTrace{}, 1.2));
}

TEST_CASE("measurement csv") {
  std::istringstream in("v,i\n0,0\n1,2\n1,2\n3,4\n");
  std::size_t dups = 0;
  const auto set = read_measurements_csv(in, &dups);
  CHECK(set.kind == PairKind::G);
  CHECK(set.size() == 3);
  CHECK(dups == 1);

  std::istringstream flux("psi,i\n2,1\n4,2\n");
  const auto l = read_measurements_csv(flux);
  CHECK(l.kind == PairKind::L);
  CHECK(l.pairs[0] == Pair{1, 2}); // stored as (i, psi)
  std::ostringstream out;
  write_measurements_csv(out, l);
  CHECK(out.str() == "psi,i\n2,1\n4,2\n");

  std::istringstream bad_header("x,y\n1,2\n");
  CHECK_THROWS_AS(read_measurements_csv(bad_header), ParseError);
  std::istringstream bad_number("v,q\n1,abc\n");
  CHECK_THROWS_AS(read_measurements_csv(bad_number), ParseError);
  std::istringstream empty("v,q\n");
  CHECK_THROWS_AS(read_measurements_csv(empty), DomainError);
}
