#include "ddmna/dataset.hpp"

#include "ddmna/error.hpp"
#include "ddmna/kernels.hpp"
#include "ddmna/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace ddmna {

PairKind pair_kind(BranchClass cls) {
  switch (cls) {
  case BranchClass::C: return PairKind::C;
  case BranchClass::L: return PairKind::L;
  default: return PairKind::G;
  }
}

void MeasurementSet::validate() const {
  if (pairs.empty()) throw DomainError("measurement set is empty");
  for (const auto& p : pairs)
    if (!std::isfinite(p.a) || !std::isfinite(p.b)) throw DomainError("measurement set contains a non-finite entry");
}

std::size_t remove_duplicates(MeasurementSet& set) {
  std::set<std::pair<double, double>> seen;
  std::vector<Pair> kept;
  kept.reserve(set.pairs.size());
  for (const auto& p : set.pairs)
    if (seen.emplace(p.a, p.b).second) kept.push_back(p);
  const std::size_t removed = set.pairs.size() - kept.size();
  set.pairs = std::move(kept);
  return removed;
}

void SamplingPlan::validate() const {
  if (count < 1) throw DomainError("sampling plan needs count >= 1");
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw DomainError("sampling range must satisfy lo <= hi");
  if (count > 1 && !(hi > lo)) throw DomainError("sampling range is degenerate for count > 1");
}

std::vector<double> sample_grid(const SamplingPlan& plan) {
  plan.validate();
  if (plan.count == 1) return {0.5 * (plan.lo + plan.hi)};
  const std::size_t n = plan.count;
  std::vector<double> x(n);

  if (plan.spacing == Spacing::ArcLength) throw DomainError("arc-length spacing needs a model");
  if (plan.spacing == Spacing::Uniform) {
    for (std::size_t k = 0; k < n; ++k)
      x[k] = plan.lo + (plan.hi - plan.lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  } else {
    // Symmetric logarithm: s(x) = sign(x) log(1 + |x|/c), uniform in s.
    const double c = plan.log_core > 0.0 ? plan.log_core : 1e-6 * std::max(std::abs(plan.lo), std::abs(plan.hi));
    auto fwd = [c](double v) { return std::copysign(std::log1p(std::abs(v) / c), v); };
    auto inv = [c](double s) { return std::copysign(c * std::expm1(std::abs(s)), s); };
    const double s0 = fwd(plan.lo);
    const double s1 = fwd(plan.hi);
    for (std::size_t k = 0; k < n; ++k) x[k] = inv(s0 + (s1 - s0) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  x.front() = plan.lo;
  x.back() = plan.hi;
  return x;
}

double invert_element(const ElementModel& model, double b) {
  return std::visit(
      [b](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return b / m.value;
        } else if constexpr (std::is_same_v<T, ShockleyDiodeModel>) {
          return composite_diode_voltage(m, b);
        } else {
          // q(v) is odd and increasing with slope in [Cinf, C0]; Newton from the plateau estimate.
          double v = b / m.c_inf;
          double lo = b / m.c_inf, hi = b / m.c0;
          if (lo > hi) std::swap(lo, hi);
          v = std::clamp(v, lo, hi);
          for (int it = 0; it < 100; ++it) {
            const double r = mlcc_charge(m, v) - b;
            const double step = r / mlcc_capacitance(m, v);
            v = std::clamp(v - step, lo, hi);
            if (std::abs(step) <= 1e-15 * std::max(std::abs(v), m.v0)) break;
          }
          return v;
        }
      },
      model);
}

namespace {

Pair sample_at(const ElementModel& model, Drive drive, double x) {
  if (drive == Drive::A) {
    if (const auto* d = std::get_if<ShockleyDiodeModel>(&model)) {
      const auto pt = composite_diode_current(*d, x);
      if (pt.clamped) throw DomainError("diode sample beyond exponent clamp at v = " + std::to_string(x));
      return {x, pt.current};
    }
    return {x, eval_element(model, x)};
  }
  if (const auto* d = std::get_if<ShockleyDiodeModel>(&model); d && !(x > -d->i_s))
    throw DomainError("diode current sample at or below -i_s");
  return {invert_element(model, x), x};
}

// Drive values spaced evenly in sqrt(w da^2 + db^2 / w) along the model curve.
std::vector<double> arc_length_grid(const ElementModel& model, const SamplingPlan& plan) {
  const std::size_t n = plan.count;
  const std::size_t m = std::max<std::size_t>(4096, 4 * n);
  std::vector<double> x(m), s(m, 0.0);
  std::vector<Pair> p(m);
  for (std::size_t k = 0; k < m; ++k) {
    x[k] = plan.lo + (plan.hi - plan.lo) * static_cast<double>(k) / static_cast<double>(m - 1);
    p[k] = sample_at(model, plan.drive, x[k]);
  }
  double w = plan.arc_weight;
  if (!(w > 0.0)) {
    const double da = std::abs(p.back().a - p.front().a);
    const double db = std::abs(p.back().b - p.front().b);
    w = da > 0.0 && db > 0.0 ? db / da : 1.0;
  }
  for (std::size_t k = 1; k < m; ++k) {
    const double da = p[k].a - p[k - 1].a, db = p[k].b - p[k - 1].b;
    s[k] = s[k - 1] + std::sqrt(w * da * da + db * db / w);
  }
  std::vector<double> out(n);
  std::size_t seg = 1;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = s.back() * static_cast<double>(j) / static_cast<double>(n - 1);
    while (seg < m - 1 && s[seg] < target) ++seg;
    const double span = s[seg] - s[seg - 1];
    const double f = span > 0.0 ? std::clamp((target - s[seg - 1]) / span, 0.0, 1.0) : 0.0;
    out[j] = x[seg - 1] + f * (x[seg] - x[seg - 1]);
  }
  out.front() = plan.lo;
  out.back() = plan.hi;
  return out;
}

} // namespace

MeasurementSet generate_measurements(const ElementModel& model, PairKind kind, const SamplingPlan& plan) {
  MeasurementSet set;
  set.kind = kind;
  plan.validate();
  const auto grid = plan.spacing == Spacing::ArcLength && plan.count > 1 ? arc_length_grid(model, plan)
                    : plan.spacing == Spacing::ArcLength ? std::vector<double>{0.5 * (plan.lo + plan.hi)}
                                                         : sample_grid(plan);
  set.pairs.reserve(grid.size());
  for (double x : grid) set.pairs.push_back(sample_at(model, plan.drive, x));
  remove_duplicates(set);
  return set;
}

NearestResult nearest_measurement(const MeasurementSet& set, const Pair& query, double w) {
  if (set.pairs.empty()) throw DomainError("nearest_measurement on an empty set");
  return kernels::nearest_scan_serial(set.pairs, query, w);
}

double chord_weight(const MeasurementSet& set) {
  if (set.pairs.empty()) throw DomainError("chord weight of an empty set");
  double a0 = set.pairs.front().a, a1 = a0, b0 = set.pairs.front().b, b1 = b0;
  for (const auto& p : set.pairs) {
    a0 = std::min(a0, p.a), a1 = std::max(a1, p.a);
    b0 = std::min(b0, p.b), b1 = std::max(b1, p.b);
  }
  if (a1 > a0 && b1 > b0) return (b1 - b0) / (a1 - a0);
  // Single point or flat data: fall back to the secant through the origin, then to one.
  const auto& p = set.pairs.front();
  if (p.a != 0.0 && p.b != 0.0) return std::abs(p.b / p.a);
  return 1.0;
}

TangentEstimate local_tangent_weight(const MeasurementSet& set, const Pair& state, std::size_t k, double w_current,
                                     double w_min, double w_max, const NearestIndex* index) {
  if (set.size() < 2) throw DomainError("local tangent needs at least two pairs");
  if (k < 2) throw DomainError("local tangent needs k >= 2");

  std::vector<NearestResult> nn;
  if (index) {
    nn = index->k_nearest(state, w_current, k);
  } else {
    nn.reserve(set.size());
    for (std::size_t j = 0; j < set.size(); ++j)
      nn.push_back({j, set.pairs[j], weighted_pair_distance(set.pairs[j], state, w_current)});
    const std::size_t kk = std::min(k, nn.size());
    std::partial_sort(nn.begin(), nn.begin() + static_cast<std::ptrdiff_t>(kk), nn.end(),
                      [](const NearestResult& x, const NearestResult& y) {
                        return x.distance < y.distance || (x.distance == y.distance && x.index < y.index);
                      });
    nn.resize(kk);
  }

  double ma = 0.0, mb = 0.0;
  for (const auto& r : nn) ma += r.pair.a, mb += r.pair.b;
  ma /= static_cast<double>(nn.size());
  mb /= static_cast<double>(nn.size());
  double saa = 0.0, sab = 0.0;
  for (const auto& r : nn) {
    saa += (r.pair.a - ma) * (r.pair.a - ma);
    sab += (r.pair.a - ma) * (r.pair.b - mb);
  }
  if (!(saa > 0.0)) return {w_current, true, false};
  const double slope = std::abs(sab / saa);
  const double value = std::clamp(slope, w_min, w_max);
  return {value, false, value != slope};
}

Pair project_known_linear(double w, const Pair& query) {
  const double a = 0.5 * (query.a + query.b / w);
  return {a, w * a};
}

Range widen(Range r, double margin) {
  const double mid = 0.5 * (r.lo + r.hi);
  const double half = std::max(0.5 * (r.hi - r.lo) * margin, (margin - 1.0) * std::abs(mid));
  return {mid - half, mid + half};
}

Pair element_pair(const CircuitState& s, BranchClass cls, std::size_t column) {
  const auto j = static_cast<Eigen::Index>(column);
  switch (cls) {
  case BranchClass::G: return {s.v_g(j), s.i_g(j)};
  case BranchClass::C: return {s.v_c(j), s.q_c(j)};
  case BranchClass::L: return {s.i_l(j), s.psi_l(j)};
  default: throw Error("element_pair on a source");
  }
}

void set_element_pair(CircuitState& s, BranchClass cls, std::size_t column, const Pair& p) {
  const auto j = static_cast<Eigen::Index>(column);
  switch (cls) {
  case BranchClass::G: s.v_g(j) = p.a, s.i_g(j) = p.b; break;
  case BranchClass::C: s.v_c(j) = p.a, s.q_c(j) = p.b; break;
  case BranchClass::L: s.i_l(j) = p.a, s.psi_l(j) = p.b; break;
  default: throw Error("set_element_pair on a source");
  }
}

Envelope operating_envelope(const CircuitGraph& graph, const TransientTrace& trace, double margin) {
  if (trace.states.empty()) throw DomainError("operating envelope of an empty trace");
  if (!(margin >= 1.0)) throw DomainError("envelope margin must be >= 1");
  Envelope env;
  auto scan = [&](BranchClass cls, std::size_t n, std::vector<Range>& ra, std::vector<Range>& rb) {
    ra.assign(n, {});
    rb.assign(n, {});
    for (std::size_t j = 0; j < n; ++j) {
      Range a{HUGE_VAL, -HUGE_VAL}, b{HUGE_VAL, -HUGE_VAL};
      for (const auto& s : trace.states) {
        const Pair p = element_pair(s, cls, j);
        a.lo = std::min(a.lo, p.a), a.hi = std::max(a.hi, p.a);
        b.lo = std::min(b.lo, p.b), b.hi = std::max(b.hi, p.b);
      }
      ra[j] = widen(a, margin);
      rb[j] = widen(b, margin);
    }
  };
  scan(BranchClass::G, graph.n_g(), env.g_a, env.g_b);
  scan(BranchClass::C, graph.n_c(), env.c_a, env.c_b);
  scan(BranchClass::L, graph.n_l(), env.l_a, env.l_b);
  return env;
}

MeasurementSet read_measurements_csv(std::istream& in, std::size_t* duplicates) {
  MeasurementSet set;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header) {
      std::string h;
      for (char ch : line)
        if (!std::isspace(static_cast<unsigned char>(ch))) h += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (h == "v,i") set.kind = PairKind::G;
      else if (h == "v,q") set.kind = PairKind::C;
      else if (h == "psi,i") set.kind = PairKind::L;
      else throw ParseError("measurement header must be v,i | v,q | psi,i", line_no, 1);
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected two comma-separated values", line_no, 1);
    auto num = [&](const std::string& s, int col) {
      const char* b = s.c_str();
      while (std::isspace(static_cast<unsigned char>(*b))) ++b;
      char* e = nullptr;
      const double v = std::strtod(b, &e);
      while (e && std::isspace(static_cast<unsigned char>(*e))) ++e;
      if (e == b || *e != '\0' || !std::isfinite(v)) throw ParseError("bad number '" + s + "'", line_no, col);
      return v;
    };
    const double x = num(line.substr(0, comma), 1);
    const double y = num(line.substr(comma + 1), static_cast<int>(comma) + 2);
    // Inductor files list (psi, i); canonical order is (i, psi).
    set.pairs.push_back(set.kind == PairKind::L ? Pair{y, x} : Pair{x, y});
  }
  if (!header) throw ParseError("missing header", line_no + 1, 1);
  const std::size_t removed = remove_duplicates(set);
  if (duplicates) *duplicates = removed;
  set.validate();
  return set;
}

MeasurementSet read_measurements_file(const std::string& path, std::size_t* duplicates) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open measurement file '" + path + "'");
  return read_measurements_csv(in, duplicates);
}

void write_measurements_csv(std::ostream& out, const MeasurementSet& set) {
  switch (set.kind) {
  case PairKind::G: out << "v,i\n"; break;
  case PairKind::C: out << "v,q\n"; break;
  case PairKind::L: out << "psi,i\n"; break;
  }
  char buf[80];
  for (const auto& p : set.pairs) {
    const double x = set.kind == PairKind::L ? p.b : p.a;
    const double y = set.kind == PairKind::L ? p.a : p.b;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, y);
    out << buf;
  }
}

} // namespace ddmna
