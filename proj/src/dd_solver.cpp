#include "ddmna/dd_solver.hpp"

#include "ddmna/error.hpp"
#include "ddmna/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace ddmna {

namespace {

constexpr BranchClass kPassive[] = {BranchClass::G, BranchClass::C, BranchClass::L};

// Closest point on b = c*a under the metric with weight w.
Pair project_on_line(double c, double w, const Pair& q) {
  if (c == w) return project_known_linear(w, q);
  const double a = (w * q.a + c * q.b / w) / (w + c * c / w);
  return {a, c * a};
}

double linear_coefficient(const ElementModel& m) {
  if (const auto* lin = std::get_if<LinearModel>(&m)) return lin->value;
  return element_tangent(m, 0.0);
}

} // namespace

void DDConfig::validate() const {
  if (!(tol_em > 0.0)) throw ConfigError("tol_em must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (tangent_k < 2) throw ConfigError("tangent_k must be at least 2");
  if (!(w_min_factor > 0.0) || !(w_max_factor >= w_min_factor)) throw ConfigError("invalid weight clamp factors");
  if (virtual_count < 2) throw ConfigError("virtual_count must be at least 2");
  if (!(virtual_margin >= 1.0)) throw ConfigError("virtual_margin must be >= 1");
}

double& WeightSet::at(BranchClass cls, std::size_t column) {
  const auto j = static_cast<Eigen::Index>(column);
  switch (cls) {
  case BranchClass::G: return g(j);
  case BranchClass::C: return c(j);
  case BranchClass::L: return l(j);
  default: throw Error("sources carry no weight");
  }
}

double WeightSet::at(BranchClass cls, std::size_t column) const { return const_cast<WeightSet&>(*this).at(cls, column); }

WeightSet WeightSet::scaled(double factor) const { return {g * factor, c * factor, l * factor}; }

void WeightSet::validate() const {
  for (const auto* v : {&g, &c, &l})
    for (Eigen::Index j = 0; j < v->size(); ++j)
      if (!((*v)(j) > 0.0) || !std::isfinite((*v)(j))) throw ConfigError("weights must be positive and finite");
}

WeightSet default_weights(const CircuitGraph& graph, const CircuitBindings& bindings) {
  WeightSet w{Eigen::VectorXd(static_cast<Eigen::Index>(graph.n_g())),
              Eigen::VectorXd(static_cast<Eigen::Index>(graph.n_c())),
              Eigen::VectorXd(static_cast<Eigen::Index>(graph.n_l()))};
  for (auto cls : kPassive) {
    const auto& grp = bindings.group(cls);
    for (std::size_t j = 0; j < grp.size(); ++j)
      w.at(cls, j) = grp[j].known() ? linear_coefficient(grp[j].model()) : chord_weight(*grp[j].data().set);
  }
  return w;
}

double energy_mismatch(const CircuitGraph& graph, const CircuitState& a, const CircuitState& b, const WeightSet& w) {
  double sum = 0.0;
  for (auto cls : kPassive)
    for (std::size_t j = 0; j < graph.group(cls).size(); ++j)
      sum += weighted_pair_distance(element_pair(a, cls, j), element_pair(b, cls, j), w.at(cls, j));
  return sum;
}

ProjectionLayout ProjectionLayout::of(const IncidenceSet& inc) {
  return {inc.rows(), inc.a_g.cols(), inc.a_c.cols(), inc.a_l.cols(), inc.a_v.cols()};
}

ModelLines ModelLines::none(const IncidenceSet& inc) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {Eigen::VectorXd::Constant(inc.a_g.cols(), nan), Eigen::VectorXd::Constant(inc.a_c.cols(), nan),
          Eigen::VectorXd::Constant(inc.a_l.cols(), nan)};
}

double ModelLines::slope(BranchClass cls, std::size_t column) const {
  const auto j = static_cast<Eigen::Index>(column);
  switch (cls) {
  case BranchClass::G: return g(j);
  case BranchClass::C: return c(j);
  case BranchClass::L: return l(j);
  default: throw Error("sources have no model line");
  }
}

namespace {

// Quadratic form of one element's distance term in its canonical pair (a, b).
struct PairForm {
  Eigen::VectorXd aa, ab, bb;
};

PairForm pair_form(const Eigen::VectorXd& w, const Eigen::VectorXd* slope) {
  PairForm f{w, Eigen::VectorXd::Zero(w.size()), w.cwiseInverse()};
  if (!slope) return f;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double c = (*slope)(j);
    if (std::isnan(c)) continue;
    // Weighted squared distance to the line b = c*a: (b - c*a)^2 / (2 (w + c^2/w)).
    const double k = 1.0 / (w(j) + c * c / w(j));
    f.aa(j) = k * c * c;
    f.ab(j) = -k * c;
    f.bb(j) = k;
  }
  return f;
}

bool on_line(const ModelLines* lines, const Eigen::VectorXd ModelLines::*member, Eigen::Index j) {
  return lines && !std::isnan((lines->*member)(j));
}

Eigen::MatrixXd projection_matrix(const IncidenceSet& inc, const WeightSet& w, const StepRule& rule,
                                  const ModelLines* lines) {
  const auto L = ProjectionLayout::of(inc);
  const double alpha = rule.alpha();
  const auto fg = pair_form(w.g, lines ? &lines->g : nullptr);
  const auto fc = pair_form(w.c, lines ? &lines->c : nullptr);
  const auto fl = pair_form(w.l, lines ? &lines->l : nullptr);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(L.size(), L.size());

  // Stationarity of the weighted distance.
  m.block(L.phi(), L.phi(), L.n_phi, L.n_phi) =
      inc.a_g * fg.aa.asDiagonal() * inc.a_g.transpose() + inc.a_c * fc.aa.asDiagonal() * inc.a_c.transpose();
  m.block(L.phi(), L.i_g(), L.n_phi, L.n_g) = inc.a_g * fg.ab.asDiagonal();
  m.block(L.phi(), L.q_c(), L.n_phi, L.n_c) = inc.a_c * fc.ab.asDiagonal();
  m.block(L.phi(), L.lambda_l(), L.n_phi, L.n_l) = -inc.a_l;
  m.block(L.phi(), L.lambda_v(), L.n_phi, L.n_v) = -inc.a_v;
  m.block(L.i_g(), L.phi(), L.n_g, L.n_phi) = fg.ab.asDiagonal() * inc.a_g.transpose();
  m.block(L.i_g(), L.i_g(), L.n_g, L.n_g) = Eigen::MatrixXd(fg.bb.asDiagonal());
  m.block(L.i_g(), L.eta(), L.n_g, L.n_phi) = -inc.a_g.transpose();
  m.block(L.q_c(), L.phi(), L.n_c, L.n_phi) = fc.ab.asDiagonal() * inc.a_c.transpose();
  m.block(L.q_c(), L.q_c(), L.n_c, L.n_c) = Eigen::MatrixXd(fc.bb.asDiagonal());
  m.block(L.q_c(), L.eta(), L.n_c, L.n_phi) = -alpha * inc.a_c.transpose();
  m.block(L.i_l(), L.i_l(), L.n_l, L.n_l) = Eigen::MatrixXd(fl.aa.asDiagonal());
  m.block(L.i_l(), L.psi_l(), L.n_l, L.n_l) = Eigen::MatrixXd(fl.ab.asDiagonal());
  m.block(L.i_l(), L.eta(), L.n_l, L.n_phi) = -inc.a_l.transpose();
  m.block(L.psi_l(), L.i_l(), L.n_l, L.n_l) = Eigen::MatrixXd(fl.ab.asDiagonal());
  m.block(L.psi_l(), L.psi_l(), L.n_l, L.n_l) = Eigen::MatrixXd(fl.bb.asDiagonal());
  m.block(L.psi_l(), L.lambda_l(), L.n_l, L.n_l) = alpha * Eigen::MatrixXd::Identity(L.n_l, L.n_l);
  m.block(L.i_v(), L.eta(), L.n_v, L.n_phi) = -inc.a_v.transpose();

  // Discrete Kirchhoff constraints.
  m.block(L.eta(), L.i_g(), L.n_phi, L.n_g) = inc.a_g;
  m.block(L.eta(), L.q_c(), L.n_phi, L.n_c) = alpha * inc.a_c;
  m.block(L.eta(), L.i_l(), L.n_phi, L.n_l) = inc.a_l;
  m.block(L.eta(), L.i_v(), L.n_phi, L.n_v) = inc.a_v;
  m.block(L.lambda_l(), L.phi(), L.n_l, L.n_phi) = inc.a_l.transpose();
  m.block(L.lambda_l(), L.psi_l(), L.n_l, L.n_l) = -alpha * Eigen::MatrixXd::Identity(L.n_l, L.n_l);
  m.block(L.lambda_v(), L.phi(), L.n_v, L.n_phi) = inc.a_v.transpose();
  return m;
}

Eigen::VectorXd projection_rhs(const IncidenceSet& inc, const WeightSet& w, const CircuitState& t,
                               const HistoryState& history, const Eigen::VectorXd& v_src, const Eigen::VectorXd& i_src,
                               const StepRule& rule, const ModelLines* lines) {
  const auto L = ProjectionLayout::of(inc);
  // Elements folded onto their model line have no target.
  auto masked = [&](Eigen::VectorXd v, const Eigen::VectorXd ModelLines::*member) {
    for (Eigen::Index j = 0; j < v.size(); ++j)
      if (on_line(lines, member, j)) v(j) = 0.0;
    return v;
  };
  const Eigen::VectorXd vg = masked(w.g.cwiseProduct(t.v_g), &ModelLines::g);
  const Eigen::VectorXd vc = masked(w.c.cwiseProduct(t.v_c), &ModelLines::c);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(L.size());
  b.segment(L.phi(), L.n_phi) = inc.a_g * vg + inc.a_c * vc;
  b.segment(L.i_g(), L.n_g) = masked(t.i_g.cwiseQuotient(w.g), &ModelLines::g);
  b.segment(L.q_c(), L.n_c) = masked(t.q_c.cwiseQuotient(w.c), &ModelLines::c);
  b.segment(L.i_l(), L.n_l) = masked(w.l.cwiseProduct(t.i_l), &ModelLines::l);
  b.segment(L.psi_l(), L.n_l) = masked(t.psi_l.cwiseQuotient(w.l), &ModelLines::l);
  b.segment(L.eta(), L.n_phi) = inc.a_i * i_src + inc.a_c * history.q_term(rule);
  b.segment(L.lambda_l(), L.n_l) = -history.psi_term(rule);
  b.segment(L.lambda_v(), L.n_v) = v_src;
  return b;
}

} // namespace

ProjectionSystem assemble_projection_system(const IncidenceSet& inc, const WeightSet& w, const CircuitState& target,
                                            const HistoryState& history, const Eigen::VectorXd& v_src,
                                            const Eigen::VectorXd& i_src, const StepRule& rule,
                                            const ModelLines* lines) {
  return {projection_matrix(inc, w, rule, lines), projection_rhs(inc, w, target, history, v_src, i_src, rule, lines),
          ProjectionLayout::of(inc)};
}

KirchhoffProjector::KirchhoffProjector(const IncidenceSet& inc, const WeightSet& w, const StepRule& rule,
                                       std::optional<ModelLines> lines)
    : inc_(&inc), w_(w), rule_(rule), lines_(std::move(lines)), layout_(ProjectionLayout::of(inc)),
      matrix_(projection_matrix(inc, w, rule, lines_ ? &*lines_ : nullptr)) {
  w_.validate();
  // Ruiz equilibration: weights spanning many decades otherwise defeat the rank threshold.
  const Eigen::Index n = matrix_.rows();
  row_scale_ = Eigen::VectorXd::Ones(n);
  col_scale_ = Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd scaled = matrix_;
  for (int pass = 0; pass < 20; ++pass) {
    Eigen::VectorXd r = scaled.cwiseAbs().rowwise().maxCoeff();
    Eigen::VectorXd c = scaled.cwiseAbs().colwise().maxCoeff().transpose();
    if ((r.array() - 1.0).abs().maxCoeff() < 1e-3 && (c.array() - 1.0).abs().maxCoeff() < 1e-3) break;
    for (Eigen::Index k = 0; k < n; ++k) {
      r(k) = r(k) > 0.0 ? 1.0 / std::sqrt(r(k)) : 1.0;
      c(k) = c(k) > 0.0 ? 1.0 / std::sqrt(c(k)) : 1.0;
    }
    scaled = r.asDiagonal() * scaled * c.asDiagonal();
    row_scale_ = row_scale_.cwiseProduct(r);
    col_scale_ = col_scale_.cwiseProduct(c);
  }
  lu_.compute(scaled);
  if (!lu_.isInvertible()) {
    std::ostringstream msg;
    msg << "singular projection system (rank " << lu_.rank() << " of " << matrix_.rows()
        << "); the circuit has a voltage-source loop or a current-source cut set";
    throw TopologyError(msg.str());
  }
}

Eigen::VectorXd KirchhoffProjector::rhs(const CircuitState& target, const HistoryState& history,
                                        const Eigen::VectorXd& v_src, const Eigen::VectorXd& i_src) const {
  return projection_rhs(*inc_, w_, target, history, v_src, i_src, rule_, lines_ ? &*lines_ : nullptr);
}

Eigen::VectorXd KirchhoffProjector::solve(const Eigen::VectorXd& b) const {
  auto raw = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
    return col_scale_.cwiseProduct(lu_.solve(row_scale_.cwiseProduct(r)));
  };
  Eigen::VectorXd x = raw(b);
  // One refinement pass; the weights span many decades.
  x += raw(b - matrix_ * x);
  return x;
}

CircuitState KirchhoffProjector::unpack(const Eigen::VectorXd& x) const {
  const auto& L = layout_;
  CircuitState s;
  s.phi = x.segment(L.phi(), L.n_phi);
  s.i_g = x.segment(L.i_g(), L.n_g);
  s.q_c = x.segment(L.q_c(), L.n_c);
  s.i_l = x.segment(L.i_l(), L.n_l);
  s.psi_l = x.segment(L.psi_l(), L.n_l);
  s.i_v = x.segment(L.i_v(), L.n_v);
  s.v_g = inc_->a_g.transpose() * s.phi;
  s.v_c = inc_->a_c.transpose() * s.phi;
  s.v_l = inc_->a_l.transpose() * s.phi;
  return s;
}

CircuitState KirchhoffProjector::project(const CircuitState& target, const HistoryState& history,
                                         const Eigen::VectorXd& v_src, const Eigen::VectorXd& i_src) const {
  return unpack(solve(rhs(target, history, v_src, i_src)));
}

CircuitState project_to_kirchhoff(const IncidenceSet& inc, const CircuitState& target, const WeightSet& w,
                                  const HistoryState& history, const Eigen::VectorXd& v_src,
                                  const Eigen::VectorXd& i_src, const StepRule& rule) {
  return KirchhoffProjector(inc, w, rule).project(target, history, v_src, i_src);
}

DataDrivenSolver::DataDrivenSolver(const CircuitGraph& graph, const CircuitBindings& bindings, DDConfig config,
                                   std::optional<WeightSet> weights)
    : graph_(graph), inc_(build_incidence(graph)), config_(config) {
  config_.validate();
  weights_ = weights ? *weights : default_weights(graph, bindings);
  weights_.validate();
  if (static_cast<std::size_t>(weights_.g.size()) != graph.n_g() ||
      static_cast<std::size_t>(weights_.c.size()) != graph.n_c() ||
      static_cast<std::size_t>(weights_.l.size()) != graph.n_l())
    throw ConfigError("weight set does not match the circuit");

  // Range for virtual samples of known nonlinear elements: margin times the summed source peaks.
  double v_peak = 0.0;
  for (std::size_t idx : graph.v) v_peak += source_peak(*graph.elements[idx].waveform);
  if (v_peak == 0.0) v_peak = 1.0;
  v_peak *= config_.virtual_margin;

  for (auto cls : kPassive) {
    const auto& grp = bindings.group(cls);
    for (std::size_t j = 0; j < grp.size(); ++j) {
      Slot s;
      s.cls = cls;
      s.column = j;
      s.w_ref = weights_.at(cls, j);
      if (!grp[j].known()) {
        s.data_driven = true;
        s.set = grp[j].data().set;
        s.index = grp[j].data().index;
      } else {
        s.model = grp[j].model();
        s.linear = is_linear(s.model);
        s.coefficient = linear_coefficient(s.model);
        if (!s.linear) {
          SamplingPlan plan{-v_peak, v_peak, config_.virtual_count};
          if (const auto* d = std::get_if<ShockleyDiodeModel>(&s.model); d && d->r_series == 0.0)
            plan.hi = std::min(plan.hi, 150.0 * d->n_ideality * d->v_t);
          auto set = generate_measurements(s.model, pair_kind(cls), plan);
          s.set = std::make_shared<const MeasurementSet>(std::move(set));
          s.index = std::make_shared<const NearestIndex>(*s.set);
        }
      }
      if (s.set) {
        // Position of each measurement along the curve, ordered by drive then response.
        const auto& pairs = s.set->pairs;
        std::vector<std::size_t> order(pairs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
          return pairs[x].a != pairs[y].a ? pairs[x].a < pairs[y].a : pairs[x].b < pairs[y].b;
        });
        std::vector<std::size_t> rank(pairs.size());
        for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
        s.order = std::make_shared<const std::vector<std::size_t>>(std::move(order));
        s.rank = std::make_shared<const std::vector<std::size_t>>(std::move(rank));
      }
      slots_.push_back(std::move(s));
    }
  }
}

std::vector<std::pair<BranchClass, std::size_t>> DataDrivenSolver::data_elements() const {
  std::vector<std::pair<BranchClass, std::size_t>> out;
  for (const auto& s : slots_)
    if (s.data_driven) out.emplace_back(s.cls, s.column);
  return out;
}

const MeasurementSet& DataDrivenSolver::dataset(BranchClass cls, std::size_t column) const {
  for (const auto& s : slots_)
    if (s.cls == cls && s.column == column && s.set) return *s.set;
  throw ConfigError("element has no dataset");
}

CircuitState DataDrivenSolver::project_to_data(const CircuitState& feasible, const WeightSet& w,
                                               std::vector<int>* selections) const {
  CircuitState out = feasible;
  if (selections) selections->assign(slots_.size(), -1);
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    const auto& s = slots_[k];
    const Pair q = element_pair(feasible, s.cls, s.column);
    const double wk = w.at(s.cls, s.column);
    Pair p;
    if (s.linear) {
      p = project_on_line(s.coefficient, wk, q);
    } else {
      const auto r = s.index->nearest(q, wk);
      p = r.pair;
      if (selections && s.data_driven) (*selections)[k] = static_cast<int>(r.index);
    }
    set_element_pair(out, s.cls, s.column, p);
  }
  return out;
}

CircuitState DataDrivenSolver::seed_state() const {
  CircuitState out = CircuitState::zero(graph_);
  for (const auto& s : slots_) {
    if (!s.data_driven) continue;
    set_element_pair(out, s.cls, s.column, s.index->nearest({0.0, 0.0}, weights_.at(s.cls, s.column)).pair);
  }
  return out;
}

CircuitState DataDrivenSolver::data_state(const std::vector<std::size_t>& selection) const {
  CircuitState out = CircuitState::zero(graph_);
  std::size_t k = 0;
  for (const auto& s : slots_) {
    if (!s.data_driven) continue;
    if (k >= selection.size() || selection[k] >= s.set->size()) throw ConfigError("selection out of range");
    set_element_pair(out, s.cls, s.column, s.set->pairs[selection[k++]]);
  }
  return out;
}

WeightSet DataDrivenSolver::tangent_weights(const CircuitState& data, const WeightSet& current) const {
  WeightSet w = current;
  for (const auto& s : slots_) {
    if (s.linear) continue;
    const Pair p = element_pair(data, s.cls, s.column);
    const double lo = config_.w_min_factor * s.w_ref, hi = config_.w_max_factor * s.w_ref;
    if (s.data_driven) {
      w.at(s.cls, s.column) =
          local_tangent_weight(*s.set, p, config_.tangent_k, current.at(s.cls, s.column), lo, hi, s.index.get()).value;
    } else {
      w.at(s.cls, s.column) = std::clamp(element_tangent(s.model, p.a), lo, hi);
    }
  }
  return w;
}

std::optional<ModelLines> DataDrivenSolver::model_lines() const {
  if (!config_.eliminate_known) return std::nullopt;
  ModelLines lines = ModelLines::none(inc_);
  bool any = false;
  for (const auto& s : slots_) {
    if (!s.linear) continue;
    const auto j = static_cast<Eigen::Index>(s.column);
    (s.cls == BranchClass::G ? lines.g : s.cls == BranchClass::C ? lines.c : lines.l)(j) = s.coefficient;
    any = true;
  }
  if (!any) return std::nullopt;
  return lines;
}

DDStepResult DataDrivenSolver::solve_step(const CircuitState& start, const HistoryState& history,
                                          const StepRule& rule, double t_next) const {
  const bool tangent = config_.weight_rule == ElementWeight::Rule::LocalTangent;
  const Eigen::VectorXd v_src = source_voltages(graph_, t_next);
  const Eigen::VectorXd i_src = source_currents(graph_, t_next);

  const auto lines = model_lines();
  std::optional<KirchhoffProjector> projector;
  if (!tangent) projector.emplace(inc_, weights_, rule, lines);
  WeightSet w = weights_;

  DDStepResult best;
  double best_em = std::numeric_limits<double>::infinity();
  StepDiagnostics diag;
  diag.converged = false;
  CircuitState data = start;
  double first_em = 0.0, prev_em = 0.0;
  int it = 0;

  auto record = [&](CircuitState feasible, const CircuitState& next, std::vector<int> sel, double em) {
    diag.history.push_back(em);
    diag.selections.push_back(std::move(sel));
    if (em <= best_em) {
      best_em = em;
      best.state = std::move(feasible);
      best.data = next;
    }
  };

  // Mismatch of a fixed data tuple: known elements follow the Kirchhoff state onto their models.
  auto tuple_mismatch = [&](const CircuitState& base, const std::vector<int>& sel, CircuitState& feasible,
                            CircuitState& tuple) {
    tuple = base;
    for (std::size_t k = 0; k < slots_.size(); ++k)
      if (sel[k] >= 0)
        set_element_pair(tuple, slots_[k].cls, slots_[k].column, slots_[k].set->pairs[static_cast<std::size_t>(sel[k])]);
    feasible = projector->project(tuple, history, v_src, i_src);
    const CircuitState known = project_to_data(feasible, w);
    for (std::size_t k = 0; k < slots_.size(); ++k)
      if (sel[k] < 0)
        set_element_pair(tuple, slots_[k].cls, slots_[k].column, element_pair(known, slots_[k].cls, slots_[k].column));
    return energy_mismatch(graph_, feasible, tuple, w);
  };

  // Walks each selection along its curve with doubling strides while the mismatch drops.
  auto line_search = [&](CircuitState& feasible, CircuitState& next, std::vector<int>& sel, double& em) {
    for (std::size_t k = 0; k < slots_.size(); ++k) {
      const auto& s = slots_[k];
      if (sel[k] < 0 || !s.order) continue;
      const auto n = static_cast<std::ptrdiff_t>(s.set->size());
      for (int dir : {1, -1}) {
        for (std::ptrdiff_t stride = 1;; stride *= 2) {
          const auto pos = static_cast<std::ptrdiff_t>((*s.rank)[static_cast<std::size_t>(sel[k])]) + dir * stride;
          if (pos < 0 || pos >= n) break;
          std::vector<int> trial = sel;
          trial[k] = static_cast<int>((*s.order)[static_cast<std::size_t>(pos)]);
          CircuitState f, t;
          const double e = tuple_mismatch(next, trial, f, t);
          if (!(e < em)) break;
          feasible = std::move(f);
          next = std::move(t);
          sel = std::move(trial);
          em = e;
          ++diag.moves;
        }
      }
    }
  };

  const bool search = config_.neighbor_search && !tangent;
  for (it = 1; it <= config_.max_iters; ++it) {
    if (tangent) {
      w = tangent_weights(data, w);
      projector.emplace(inc_, w, rule, lines);
    }
    CircuitState feasible = projector->project(data, history, v_src, i_src);
    std::vector<int> sel;
    CircuitState next = project_to_data(feasible, w, &sel);
    double em = energy_mismatch(graph_, feasible, next, w);
    if (search && em > 0.0) line_search(feasible, next, sel, em);

    bool repeated = true;
    for (const auto& s : slots_)
      if (!(element_pair(next, s.cls, s.column) == element_pair(data, s.cls, s.column))) {
        repeated = false;
        break;
      }

    if (it == 1) first_em = em;
    const bool settled = it > 1 && std::abs(em - prev_em) <= config_.tol_em * std::max(first_em, 1e-30);
    record(std::move(feasible), next, std::move(sel), em);
    data = std::move(next);
    prev_em = em;
    if (em == 0.0 || settled || repeated) {
      diag.converged = true;
      break;
    }
  }
  it = std::min(it, config_.max_iters);

  diag.iterations = it;
  diag.final_value = best_em;
  best.trace = std::move(diag);
  return best;
}

namespace {

// Drive value of an element whose dependent value is fixed by the initial condition.
double drive_for(const ElementModel* model, const MeasurementSet* set, double b) {
  if (model) return invert_element(*model, b);
  std::size_t best = 0;
  for (std::size_t k = 1; k < set->size(); ++k)
    if (std::abs(set->pairs[k].b - b) < std::abs(set->pairs[best].b - b)) best = k;
  return set->pairs[best].a;
}

} // namespace

DataDrivenSolver::InitialCondition DataDrivenSolver::initial_condition(const TransientConfig& config) const {
  config.validate();
  InitialCondition ic;
  ic.history = HistoryState::zero(graph_);
  if (config.q0.size() == ic.history.q.size()) ic.history.q = config.q0;
  if (config.psi0.size() == ic.history.psi.size()) ic.history.psi = config.psi0;

  // Held pairs of the energy-storing elements.
  CircuitState held = seed_state();
  WeightSet w = weights_;
  constexpr double kHold = 1e8;
  for (const auto& s : slots_) {
    if (s.cls == BranchClass::G) continue;
    const ElementModel* model = s.data_driven ? nullptr : &s.model;
    const auto j = static_cast<Eigen::Index>(s.column);
    if (s.cls == BranchClass::C) {
      const double q = ic.history.q(j);
      set_element_pair(held, s.cls, s.column, {drive_for(model, s.set.get(), q), q});
    } else {
      // Canonical inductor pair is (i, psi): the drive is the current.
      const double psi = ic.history.psi(j);
      set_element_pair(held, s.cls, s.column, {drive_for(model, s.set.get(), psi), psi});
    }
    w.at(s.cls, s.column) *= kHold;
  }

  std::optional<ModelLines> lines;
  if (auto all = model_lines()) {
    lines = ModelLines::none(inc_);
    lines->g = all->g;
  }
  const StepRule rule{Scheme::BackwardEuler, config.step_size()};
  const KirchhoffProjector projector(inc_, w, rule, lines);
  const Eigen::VectorXd v_src = source_voltages(graph_, config.t0);
  const Eigen::VectorXd i_src = source_currents(graph_, config.t0);

  auto hold = [&](CircuitState& s) {
    for (const auto& slot : slots_)
      if (slot.cls != BranchClass::G)
        set_element_pair(s, slot.cls, slot.column, element_pair(held, slot.cls, slot.column));
  };
  CircuitState data = held;
  CircuitState feasible;
  double first_em = 0.0, prev_em = 0.0;
  for (int it = 1; it <= config_.max_iters; ++it) {
    feasible = projector.project(data, ic.history, v_src, i_src);
    CircuitState next = project_to_data(feasible, w);
    hold(next);
    const double em = energy_mismatch(graph_, feasible, next, w);
    bool repeated = true;
    for (const auto& s : slots_)
      if (!(element_pair(next, s.cls, s.column) == element_pair(data, s.cls, s.column))) repeated = false;
    data = std::move(next);
    ic.iterations = it;
    if (it == 1) first_em = em;
    const bool settled = it > 1 && std::abs(em - prev_em) <= config_.tol_em * std::max(first_em, 1e-30);
    prev_em = em;
    if (repeated || settled || em == 0.0) break;
  }
  hold(feasible);
  feasible.q_c = ic.history.q;
  feasible.psi_l = ic.history.psi;
  ic.state = std::move(feasible);
  ic.data = std::move(data);
  return ic;
}

TransientTrace DataDrivenSolver::run(const TransientConfig& config) const {
  config.validate();
  const double h = config.step_size();
  TransientTrace trace;

  auto ic = initial_condition(config);
  const CircuitState initial = ic.state;
  HistoryState history = ic.history;
  const CircuitState seed = config_.initial_seed ? ic.data : seed_state();
  trace.times.push_back(config.t0);
  trace.states.push_back(initial);
  trace.data_states.push_back(seed);
  trace.diagnostics.push_back({});

  if (config.scheme == Scheme::Trapezoidal) {
    const StepRule boot{Scheme::BackwardEuler, h / 100.0};
    const auto r = solve_step(seed, history, boot, config.t0 + boot.h);
    history.q_dot = (r.state.q_c - history.q) / boot.h;
    history.psi_dot = (r.state.psi_l - history.psi) / boot.h;
  }

  const StepRule rule{config.scheme, h};
  CircuitState start = seed;
  for (int k = 1; k <= config.steps; ++k) {
    const double t = config.t0 + h * k;
    auto r = solve_step(start, history, rule, t);
    r.trace.kirchhoff = kirchhoff_residual(graph_, inc_, r.state, history, rule, t).max();
    history = advance_history(history, r.state, rule);
    start = r.data;
    trace.times.push_back(t);
    trace.states.push_back(std::move(r.state));
    trace.data_states.push_back(std::move(r.data));
    trace.diagnostics.push_back(std::move(r.trace));
  }
  return trace;
}

TransientTrace run_transient_dd(const CircuitGraph& graph, const CircuitBindings& bindings,
                                const TransientConfig& config, const DDConfig& dd, std::optional<WeightSet> weights) {
  return DataDrivenSolver(graph, bindings, dd, std::move(weights)).run(config);
}

BruteForceResult brute_force_timestep(const DataDrivenSolver& solver, const HistoryState& history,
                                      const StepRule& rule, double t_next, std::size_t cap, bool parallel) {
  const auto elems = solver.data_elements();
  const auto& inc = solver.incidence();
  if (elems.size() != static_cast<std::size_t>(inc.a_g.cols() + inc.a_c.cols() + inc.a_l.cols()))
    throw ConfigError("exhaustive search needs every passive element to be data-driven");

  std::vector<std::size_t> sizes;
  std::size_t total = 1;
  for (const auto& [cls, col] : elems) {
    sizes.push_back(solver.dataset(cls, col).size());
    if (total > cap / sizes.back()) throw ConfigError("tuple count exceeds the enumeration cap");
    total *= sizes.back();
  }
  if (total > cap) throw ConfigError("tuple count exceeds the enumeration cap");

  const KirchhoffProjector projector(inc, solver.weights(), rule);
  const auto decode = [&](std::size_t code) {
    std::vector<std::size_t> sel(sizes.size());
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      sel[k] = code % sizes[k];
      code /= sizes[k];
    }
    return sel;
  };
  const Eigen::VectorXd v_src = source_voltages(solver.graph(), t_next);
  const Eigen::VectorXd i_src = source_currents(solver.graph(), t_next);
  const auto mismatch = [&](std::size_t code) {
    const CircuitState data = solver.data_state(decode(code));
    const CircuitState feasible = projector.project(data, history, v_src, i_src);
    return energy_mismatch(solver.graph(), feasible, data, solver.weights());
  };
  const auto best = parallel ? kernels::argmin_parallel(total, mismatch) : kernels::argmin_serial(total, mismatch);

  BruteForceResult out;
  out.selection = decode(best.index);
  out.data = solver.data_state(out.selection);
  out.state = projector.project(out.data, history, v_src, i_src);
  out.minimum = best.value;
  out.candidates = total;
  return out;
}

} // namespace ddmna
