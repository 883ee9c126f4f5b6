#include "ddmna/elements.hpp"

#include "ddmna/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ddmna {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace

void validate(const LinearModel& m) {
  if (!positive_finite(m.value)) throw DomainError("linear element value must be positive and finite");
}

void validate(const MlccCapacitorModel& m) {
  if (!positive_finite(m.c0) || !positive_finite(m.c_inf) || !positive_finite(m.v0))
    throw DomainError("mlcc parameters must be positive and finite");
  if (!(m.c0 > m.c_inf)) throw DomainError("mlcc requires C0 > Cinf");
}

void validate(const ShockleyDiodeModel& m) {
  if (!positive_finite(m.i_s) || !positive_finite(m.n_ideality) || !positive_finite(m.v_t))
    throw DomainError("shockley parameters i_s, n, v_T must be positive and finite");
  if (!std::isfinite(m.r_series) || m.r_series < 0.0) throw DomainError("shockley series resistance must be >= 0");
}

void validate(const SourceWaveform& w) {
  if (w.kind == WaveformKind::Sin && !positive_finite(w.frequency_hz))
    throw DomainError("SIN source needs a positive frequency");
}

double shockley_current(const ShockleyDiodeModel& m, double v_d, bool* clamped) {
  double arg = v_d / (m.n_ideality * m.v_t);
  if (arg > kExpClamp) {
    arg = kExpClamp;
    if (clamped) *clamped = true;
  }
  return m.i_s * std::expm1(arg);
}

double shockley_conductance(const ShockleyDiodeModel& m, double v_d) {
  const double nvt = m.n_ideality * m.v_t;
  return m.i_s * std::exp(std::min(v_d / nvt, kExpClamp)) / nvt;
}

double composite_diode_voltage(const ShockleyDiodeModel& m, double i) {
  if (!(i > -m.i_s)) throw DomainError("composite diode voltage needs i > -i_s");
  return m.n_ideality * m.v_t * std::log1p(i / m.i_s) + m.r_series * i;
}

CompositeDiodePoint composite_diode_current(const ShockleyDiodeModel& m, double v) {
  const double nvt = m.n_ideality * m.v_t;
  if (m.r_series == 0.0) {
    bool clamped = false;
    const double i = shockley_current(m, v, &clamped);
    return {i, shockley_conductance(m, v), clamped};
  }

  // Solve for the junction voltage: h(vj) = vj + R*i_s*expm1(vj/nvt) - v = 0, increasing in vj.
  // The junction takes part of v with the same sign, so vj lies between 0 and v.
  auto junction_current = [&](double vj) { return m.i_s * std::expm1(std::min(vj / nvt, 700.0)); };
  auto h = [&](double vj) { return vj + m.r_series * junction_current(vj) - v; };
  double lo = std::min(v, 0.0);
  double hi = std::max(v, 0.0);
  // Start from the smaller of the junction-only and resistor-limited estimates.
  double vj = v > 0.0 ? std::min(v, nvt * std::log1p(v / (m.r_series * m.i_s))) : v;
  for (int it = 0; it < 200; ++it) {
    const double hv = h(vj);
    if (hv > 0.0) hi = std::min(hi, vj);
    else lo = std::max(lo, vj);
    const double dh = 1.0 + m.r_series * m.i_s * std::exp(std::min(vj / nvt, 700.0)) / nvt;
    double next = vj - hv / dh;
    if (!(next >= lo && next <= hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - vj);
    vj = next;
    if (step <= 1e-15 * std::max(std::abs(vj), nvt) || hi - lo <= 4e-16 * std::max(std::abs(hi), nvt)) break;
  }
  if (std::abs(h(vj)) > 1e-9 * std::max(1.0, std::abs(v)))
    throw SolverError("composite diode inversion did not converge at v = " + std::to_string(v));
  const double gd = m.i_s * std::exp(std::min(vj / nvt, 700.0)) / nvt;
  return {junction_current(vj), gd / (1.0 + m.r_series * gd), false};
}

double mlcc_capacitance(const MlccCapacitorModel& m, double v) {
  const double x = v / m.v0;
  return m.c_inf + (m.c0 - m.c_inf) / (1.0 + x * x);
}

double mlcc_charge(const MlccCapacitorModel& m, double v) {
  return m.c_inf * v + (m.c0 - m.c_inf) * m.v0 * std::atan(v / m.v0);
}

double eval_element(const ElementModel& model, double drive) {
  return std::visit(
      [drive](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) return m.value * drive;
        else if constexpr (std::is_same_v<T, MlccCapacitorModel>) return mlcc_charge(m, drive);
        else return composite_diode_current(m, drive).current;
      },
      model);
}

double element_tangent(const ElementModel& model, double drive) {
  return std::visit(
      [drive](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) return m.value;
        else if constexpr (std::is_same_v<T, MlccCapacitorModel>) return mlcc_capacitance(m, drive);
        else return composite_diode_current(m, drive).conductance;
      },
      model);
}

bool is_linear(const ElementModel& model) { return std::holds_alternative<LinearModel>(model); }

double source_value(const SourceWaveform& w, double t) {
  if (w.kind == WaveformKind::Dc) return w.dc_value;
  return w.offset + w.amplitude * std::sin(2.0 * std::numbers::pi * w.frequency_hz * t);
}

double source_peak(const SourceWaveform& w) {
  if (w.kind == WaveformKind::Dc) return std::abs(w.dc_value);
  return std::abs(w.offset) + std::abs(w.amplitude);
}

} // namespace ddmna
