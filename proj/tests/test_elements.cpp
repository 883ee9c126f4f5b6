#include "ddmna/elements.hpp"
#include "ddmna/error.hpp"

#include <doctest.h>

#include <cmath>

using namespace ddmna;

namespace {

const ShockleyDiodeModel kDiode{2.52e-9, 1.752, 25.85e-3, 0.0};
const ShockleyDiodeModel kDiodeRd{2.52e-9, 1.752, 25.85e-3, 10e-3};
const MlccCapacitorModel kMlcc{10e-6, 2e-6, 1.0};

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

} // namespace

TEST_CASE("shockley current") {
  CHECK(shockley_current(kDiode, 0.0) == 0.0);
  const double v = kDiode.n_ideality * kDiode.v_t * std::log(2.0);
  CHECK(v == doctest::Approx(31.39e-3).epsilon(1e-3));
  CHECK(rel(shockley_current(kDiode, v), kDiode.i_s) < 1e-12);
  CHECK(rel(shockley_current(kDiode, -5.0), -kDiode.i_s) < 1e-40);
}

TEST_CASE("shockley exponent clamp is flagged") {
  bool clamped = false;
  const double i = shockley_current(kDiode, 100.0, &clamped);
  CHECK(clamped);
  CHECK(std::isfinite(i));
  clamped = false;
  shockley_current(kDiode, 0.5, &clamped);
  CHECK_FALSE(clamped);
}

TEST_CASE("composite diode voltage") {
  CHECK(composite_diode_voltage(kDiode, 0.0) == 0.0);
  CHECK(rel(composite_diode_voltage(kDiode, kDiode.i_s), kDiode.n_ideality * kDiode.v_t * std::log(2.0)) < 1e-14);
  CHECK_THROWS_AS(composite_diode_voltage(kDiode, -kDiode.i_s), DomainError);
  CHECK_THROWS_AS(composite_diode_voltage(kDiode, -1.0), DomainError);
}

TEST_CASE("composite diode inversion round trip") {
  for (double i : {1e-6, 1e-3, 1.0}) {
    CAPTURE(i);
    CHECK(rel(composite_diode_current(kDiodeRd, composite_diode_voltage(kDiodeRd, i)).current, i) < 1e-12);
  }
  CHECK(rel(eval_element(kDiodeRd, composite_diode_voltage(kDiodeRd, 1e-3)), 1e-3) < 1e-10);
  // Identity over the documented current range, nine decades.
  for (double e = -9.0; e <= 1.0; e += 0.25) {
    const double i = std::pow(10.0, e);
    CAPTURE(i);
    CHECK(rel(composite_diode_current(kDiodeRd, composite_diode_voltage(kDiodeRd, i)).current, i) < 1e-10);
  }
}

TEST_CASE("composite diode map is strictly increasing") {
  double prev = -INFINITY;
  for (double v = -1.0; v <= 1.2; v += 0.01) {
    const double i = composite_diode_current(kDiodeRd, v).current;
    CHECK(i > prev);
    prev = i;
  }
  // Deep reverse bias rounds to -i_s; only monotone there.
  prev = -INFINITY;
  for (double v = -5.0; v <= -1.0; v += 0.01) {
    const double i = composite_diode_current(kDiodeRd, v).current;
    CHECK(i >= prev);
    prev = i;
  }
  CHECK(composite_diode_current(kDiodeRd, 1.0).conductance > 0.0);
}

TEST_CASE("mlcc capacitance") {
  CHECK(mlcc_capacitance(kMlcc, 0.0) == doctest::Approx(kMlcc.c0));
  CHECK(mlcc_capacitance(kMlcc, kMlcc.v0) == doctest::Approx(kMlcc.c_inf + (kMlcc.c0 - kMlcc.c_inf) / 2));
  // Far out the curve sits (C0 - Cinf) / (1 + 1e4) above Cinf, which is 4e-4 relative for these values.
  const double far = mlcc_capacitance(kMlcc, 100 * kMlcc.v0);
  CHECK(far == doctest::Approx(kMlcc.c_inf + (kMlcc.c0 - kMlcc.c_inf) / (1 + 1e4)).epsilon(1e-12));
  CHECK(rel(far, kMlcc.c_inf) < 5e-4);
  for (double v : {0.3, 2.0, 7.0}) {
    CHECK(mlcc_capacitance(kMlcc, v) == mlcc_capacitance(kMlcc, -v));
    CHECK(mlcc_capacitance(kMlcc, v) <= kMlcc.c0);
    CHECK(mlcc_capacitance(kMlcc, v) >= kMlcc.c_inf);
  }
}

TEST_CASE("mlcc charge is the antiderivative of the capacitance") {
  CHECK(mlcc_charge(kMlcc, 0.0) == 0.0);
  const double d = 1e-6;
  for (double v : {0.0, 1.0, 5.0}) {
    CAPTURE(v);
    const double fd = (mlcc_charge(kMlcc, v + d) - mlcc_charge(kMlcc, v - d)) / (2 * d);
    CHECK(rel(fd, mlcc_capacitance(kMlcc, v)) < 1e-6);
  }
  for (double v : {0.1, 1.0, 12.0}) CHECK(mlcc_charge(kMlcc, -v) == -mlcc_charge(kMlcc, v));
  double prev = -INFINITY;
  for (double v = -10.0; v <= 10.0; v += 0.1) {
    CHECK(mlcc_charge(kMlcc, v) > prev);
    prev = mlcc_charge(kMlcc, v);
  }
}

TEST_CASE("linear element evaluation") {
  CHECK(eval_element(LinearModel{LinearKind::Conductance, 1e-3}, 2.0) == doctest::Approx(2e-3));
  CHECK(eval_element(LinearModel{LinearKind::Capacitance, 100e-6}, 5.0) == doctest::Approx(500e-6));
  CHECK(eval_element(LinearModel{LinearKind::Inductance, 2e-3}, 3.0) == doctest::Approx(6e-3));
  CHECK(element_tangent(LinearModel{LinearKind::Capacitance, 4.0}, 123.0) == 4.0);
  CHECK(element_tangent(kMlcc, 0.0) == doctest::Approx(kMlcc.c0));
  CHECK(is_linear(LinearModel{}));
  CHECK_FALSE(is_linear(kMlcc));
}

TEST_CASE("source waveforms") {
  const auto s = SourceWaveform::sine(0.0, 5.0, 100.0);
  CHECK(source_value(s, 2.5e-3) == doctest::Approx(5.0));
  CHECK(source_value(s, 0.0) == 0.0);
  for (double t : {0.0, 1.0, 123.4}) CHECK(source_value(SourceWaveform::dc(1.0), t) == 1.0);
  CHECK(source_peak(SourceWaveform::sine(1.0, 5.0, 100.0)) == doctest::Approx(6.0));
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(validate(LinearModel{LinearKind::Conductance, 0.0}), DomainError);
  CHECK_THROWS_AS(validate(MlccCapacitorModel{1e-6, 2e-6, 1.0}), DomainError);
  CHECK_THROWS_AS(validate(ShockleyDiodeModel{2e-9, 1.7, 0.025, -1.0}), DomainError);
  CHECK_THROWS_AS(validate(SourceWaveform::sine(0, 1, 0)), DomainError);
  CHECK_NOTHROW(validate(kDiodeRd));
  CHECK_NOTHROW(validate(kMlcc));
}
