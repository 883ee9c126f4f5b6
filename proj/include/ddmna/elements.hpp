#pragma once

#include <variant>

namespace ddmna {

enum class LinearKind { Conductance, Capacitance, Inductance };

/// Constant-coefficient element: i = G v, q = C v or psi = L i.
struct LinearModel {
  LinearKind kind = LinearKind::Conductance;
  double value = 1.0;
};

/// Bias-dependent ceramic capacitor with a Lorentzian roll-off from C0 to Cinf.
struct MlccCapacitorModel {
  double c0 = 10e-6;
  double c_inf = 2e-6;
  double v0 = 1.0;
};

/// Shockley junction with an optional series resistance folded in.
struct ShockleyDiodeModel {
  double i_s = 2.52e-9;
  double n_ideality = 1.752;
  double v_t = 25.85e-3;
  double r_series = 0.0;
};

enum class WaveformKind { Dc, Sin };

struct SourceWaveform {
  WaveformKind kind = WaveformKind::Dc;
  double dc_value = 0.0;
  double offset = 0.0;
  double amplitude = 0.0;
  double frequency_hz = 0.0;

  static SourceWaveform dc(double value) { return {WaveformKind::Dc, value, 0.0, 0.0, 0.0}; }
  static SourceWaveform sine(double offset, double amplitude, double frequency_hz) {
    return {WaveformKind::Sin, 0.0, offset, amplitude, frequency_hz};
  }
};

using ElementModel = std::variant<LinearModel, MlccCapacitorModel, ShockleyDiodeModel>;

/// Largest exponent passed to exp() by the diode model.
inline constexpr double kExpClamp = 200.0;

void validate(const LinearModel& m);
void validate(const MlccCapacitorModel& m);
void validate(const ShockleyDiodeModel& m);
void validate(const SourceWaveform& w);

/// Junction current for junction voltage v_d (series resistance excluded).
/// `clamped` is set when the exponent had to be limited.
double shockley_current(const ShockleyDiodeModel& m, double v_d, bool* clamped = nullptr);
double shockley_conductance(const ShockleyDiodeModel& m, double v_d);

/// Terminal voltage of junction plus series resistor carrying current i. Requires i > -i_s.
double composite_diode_voltage(const ShockleyDiodeModel& m, double i);

struct CompositeDiodePoint {
  double current = 0.0;
  double conductance = 0.0; // di/dv of the composite branch
  bool clamped = false;     // exponent hit kExpClamp (series resistance zero only)
};

/// Inverts composite_diode_voltage by scalar Newton with a bisection fallback.
CompositeDiodePoint composite_diode_current(const ShockleyDiodeModel& m, double v);

double mlcc_capacitance(const MlccCapacitorModel& m, double v);
double mlcc_charge(const MlccCapacitorModel& m, double v);

/// Dependent quantity for a drive: i(v), q(v) or psi(i).
double eval_element(const ElementModel& model, double drive);

/// Local slope d(dependent)/d(drive) of a model at a drive point.
double element_tangent(const ElementModel& model, double drive);

bool is_linear(const ElementModel& model);

double source_value(const SourceWaveform& w, double t);

/// Largest absolute value the waveform takes over all t.
double source_peak(const SourceWaveform& w);

} // namespace ddmna
