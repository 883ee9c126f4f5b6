#include "ddmna/netlist.hpp"

#include "ddmna/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace ddmna {

BranchClass branch_class(ElementKind kind) {
  switch (kind) {
  case ElementKind::Resistor:
  case ElementKind::Diode: return BranchClass::G;
  case ElementKind::Capacitor: return BranchClass::C;
  case ElementKind::Inductor: return BranchClass::L;
  case ElementKind::VSource: return BranchClass::V;
  case ElementKind::ISource: return BranchClass::I;
  }
  return BranchClass::G;
}

const std::vector<std::size_t>& CircuitGraph::group(BranchClass cls) const {
  switch (cls) {
  case BranchClass::G: return g;
  case BranchClass::C: return c;
  case BranchClass::L: return l;
  case BranchClass::V: return v;
  case BranchClass::I: return i;
  }
  return g;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) { return lower(a) == lower(b); }

struct Token {
  std::string text;
  int column; // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) break;
    const std::size_t start = pos;
    // A parenthesised argument list stays attached to its token, spaces included.
    int depth = 0;
    while (pos < line.size() && (depth > 0 || !std::isspace(static_cast<unsigned char>(line[pos])))) {
      if (line[pos] == '(') ++depth;
      else if (line[pos] == ')') --depth;
      ++pos;
    }
    out.push_back({std::string(line.substr(start, pos - start)), static_cast<int>(start) + 1});
  }
  return out;
}

double parse_number(const Token& tok, int line) {
  const char* begin = tok.text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(value))
    throw ParseError("expected a number, got '" + tok.text + "'", line, tok.column);
  return value;
}

std::vector<double> parse_call(const Token& tok, std::string_view expected, std::size_t arity, int line) {
  const auto open = tok.text.find('(');
  const auto close = tok.text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open || close + 1 != tok.text.size())
    throw ParseError("expected " + std::string(expected) + "(...)", line, tok.column);
  if (!iequals(tok.text.substr(0, open), expected))
    throw ParseError("unknown model '" + tok.text.substr(0, open) + "', expected " + std::string(expected), line,
                     tok.column);
  std::vector<double> args;
  std::stringstream ss(tok.text.substr(open + 1, close - open - 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    Token sub{b == std::string::npos ? std::string() : item.substr(b, e - b + 1), tok.column};
    args.push_back(parse_number(sub, line));
  }
  if (args.size() != arity)
    throw ParseError(std::string(expected) + " takes " + std::to_string(arity) + " arguments", line, tok.column);
  return args;
}

void expect_count(const std::vector<Token>& toks, std::size_t n, int line) {
  if (toks.size() < n) {
    const int col = toks.empty() ? 1 : toks.back().column + static_cast<int>(toks.back().text.size());
    throw ParseError("missing field", line, col);
  }
  if (toks.size() > n) throw ParseError("unexpected token '" + toks[n].text + "'", line, toks[n].column);
}

ElementDecl parse_element(const std::vector<Token>& toks, int line) {
  ElementDecl el;
  el.name = toks[0].text;
  switch (std::toupper(static_cast<unsigned char>(el.name[0]))) {
  case 'R': el.kind = ElementKind::Resistor; break;
  case 'C': el.kind = ElementKind::Capacitor; break;
  case 'L': el.kind = ElementKind::Inductor; break;
  case 'V': el.kind = ElementKind::VSource; break;
  case 'I': el.kind = ElementKind::ISource; break;
  case 'D': el.kind = ElementKind::Diode; break;
  default: throw ParseError("unknown element kind '" + el.name.substr(0, 1) + "'", line, toks[0].column);
  }
  if (toks.size() < 4) expect_count(toks, 4, line);
  el.node_pos = toks[1].text;
  el.node_neg = toks[2].text;
  if (el.node_pos == el.node_neg)
    throw ParseError("element " + el.name + " connects node " + el.node_pos + " to itself", line, toks[2].column);

  const Token& key = toks[3];
  const std::string kw = lower(key.text);

  if (el.kind == ElementKind::VSource || el.kind == ElementKind::ISource) {
    if (kw == "dc") {
      expect_count(toks, 5, line);
      el.waveform = SourceWaveform::dc(parse_number(toks[4], line));
    } else if (kw == "sin") {
      expect_count(toks, 7, line);
      el.waveform =
          SourceWaveform::sine(parse_number(toks[4], line), parse_number(toks[5], line), parse_number(toks[6], line));
      if (!(el.waveform->frequency_hz > 0.0)) throw ParseError("SIN frequency must be positive", line, toks[6].column);
    } else {
      throw ParseError("expected DC or SIN", line, key.column);
    }
    return el;
  }

  if (kw == "data") {
    expect_count(toks, 5, line);
    el.payload = DatasetRef{toks[4].text};
    return el;
  }

  if (kw == "model") {
    expect_count(toks, 5, line);
    if (el.kind == ElementKind::Capacitor) {
      const auto a = parse_call(toks[4], "mlcc", 3, line);
      MlccCapacitorModel m{a[0], a[1], a[2]};
      try {
        validate(m);
      } catch (const DomainError& e) {
        throw ParseError(e.what(), line, toks[4].column);
      }
      el.payload = ElementModel{m};
    } else if (el.kind == ElementKind::Diode) {
      const auto a = parse_call(toks[4], "shockley", 4, line);
      ShockleyDiodeModel m{a[0], a[1], a[2], a[3]};
      try {
        validate(m);
      } catch (const DomainError& e) {
        throw ParseError(e.what(), line, toks[4].column);
      }
      el.payload = ElementModel{m};
    } else {
      throw ParseError("MODEL is not supported for " + el.name, line, key.column);
    }
    return el;
  }

  if (el.kind == ElementKind::Diode) throw ParseError("diode needs MODEL or DATA", line, key.column);
  expect_count(toks, 4, line);
  const double value = parse_number(key, line);
  if (!(value > 0.0)) throw ParseError("element value must be positive", line, key.column);
  switch (el.kind) {
  case ElementKind::Resistor: el.payload = ElementModel{LinearModel{LinearKind::Conductance, 1.0 / value}}; break;
  case ElementKind::Capacitor: el.payload = ElementModel{LinearModel{LinearKind::Capacitance, value}}; break;
  default: el.payload = ElementModel{LinearModel{LinearKind::Inductance, value}}; break;
  }
  return el;
}

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

} // namespace

std::size_t CircuitGraph::find(std::string_view name) const {
  for (std::size_t k = 0; k < elements.size(); ++k)
    if (iequals(elements[k].name, name)) return k;
  return npos;
}

std::size_t CircuitGraph::column_of(std::size_t element_index) const {
  const auto& grp = group(branch_class(elements.at(element_index).kind));
  const auto it = std::find(grp.begin(), grp.end(), element_index);
  return static_cast<std::size_t>(it - grp.begin());
}

CircuitGraph parse_netlist(std::string_view text) {
  CircuitGraph graph;
  std::map<std::string, std::size_t> node_index; // 0 is ground
  node_index["0"] = 0;
  std::map<std::string, int> seen_names;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const auto toks = tokenize(raw);
    if (toks.empty()) {
      if (eol == text.size()) break;
      continue;
    }

    ElementDecl el = parse_element(toks, line_no);
    const std::string key = lower(el.name);
    if (auto it = seen_names.find(key); it != seen_names.end())
      throw ParseError("duplicate element name '" + el.name + "' (first on line " + std::to_string(it->second) + ")",
                       line_no, toks[0].column);
    seen_names.emplace(key, line_no);

    for (const auto& node : {el.node_pos, el.node_neg}) {
      if (!node_index.contains(node)) {
        node_index.emplace(node, graph.nodes.size() + 1);
        graph.nodes.push_back(node);
      }
    }
    const std::size_t idx = graph.elements.size();
    switch (branch_class(el.kind)) {
    case BranchClass::G: graph.g.push_back(idx); break;
    case BranchClass::C: graph.c.push_back(idx); break;
    case BranchClass::L: graph.l.push_back(idx); break;
    case BranchClass::V: graph.v.push_back(idx); break;
    case BranchClass::I: graph.i.push_back(idx); break;
    }
    graph.elements.push_back(std::move(el));
    if (eol == text.size()) break;
  }

  if (graph.elements.empty()) throw TopologyError("netlist contains no elements");
  const bool has_ground = std::any_of(graph.elements.begin(), graph.elements.end(),
                                      [](const ElementDecl& e) { return e.node_pos == "0" || e.node_neg == "0"; });
  if (!has_ground) throw TopologyError("missing ground: no element connects to node 0");

  DisjointSet ds(graph.node_count());
  for (const auto& e : graph.elements) ds.unite(node_index.at(e.node_pos), node_index.at(e.node_neg));
  std::string floating;
  for (std::size_t k = 0; k < graph.nodes.size(); ++k) {
    if (ds.find(k + 1) != ds.find(0)) floating += (floating.empty() ? "" : ",") + graph.nodes[k];
  }
  if (!floating.empty()) throw TopologyError("nodes " + floating + " disconnected from ground");
  return graph;
}

CircuitGraph parse_netlist_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open netlist '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_netlist(ss.str());
}

namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Ohm value whose reciprocal reproduces the stored conductance bit-for-bit.
std::string fmt_ohms(double g) {
  double r = 1.0 / g;
  for (int k = 0; k < 16; ++k) {
    const std::string s = fmt_double(r);
    const double back = std::strtod(s.c_str(), nullptr);
    if (1.0 / back == g) return s;
    r = (1.0 / back > g) ? std::nextafter(back, HUGE_VAL) : std::nextafter(back, -HUGE_VAL);
  }
  return fmt_double(1.0 / g);
}

} // namespace

std::string to_netlist(const CircuitGraph& graph) {
  std::ostringstream out;
  for (const auto& e : graph.elements) {
    out << e.name << ' ' << e.node_pos << ' ' << e.node_neg << ' ';
    if (e.waveform) {
      const auto& w = *e.waveform;
      if (w.kind == WaveformKind::Dc) out << "DC " << fmt_double(w.dc_value);
      else out << "SIN " << fmt_double(w.offset) << ' ' << fmt_double(w.amplitude) << ' ' << fmt_double(w.frequency_hz);
    } else if (const auto* ref = std::get_if<DatasetRef>(&e.payload)) {
      out << "DATA " << ref->path;
    } else if (const auto* model = e.model()) {
      if (const auto* lin = std::get_if<LinearModel>(model)) {
        out << (lin->kind == LinearKind::Conductance ? fmt_ohms(lin->value) : fmt_double(lin->value));
      } else if (const auto* m = std::get_if<MlccCapacitorModel>(model)) {
        out << "MODEL mlcc(" << fmt_double(m->c0) << ',' << fmt_double(m->c_inf) << ',' << fmt_double(m->v0) << ')';
      } else if (const auto* d = std::get_if<ShockleyDiodeModel>(model)) {
        out << "MODEL shockley(" << fmt_double(d->i_s) << ',' << fmt_double(d->n_ideality) << ','
            << fmt_double(d->v_t) << ',' << fmt_double(d->r_series) << ')';
      }
    }
    out << '\n';
  }
  return out.str();
}

namespace {

bool same_model(const ElementModel& a, const ElementModel& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<LinearModel>(&a)) {
    const auto& y = std::get<LinearModel>(b);
    return x->kind == y.kind && x->value == y.value;
  }
  if (const auto* x = std::get_if<MlccCapacitorModel>(&a)) {
    const auto& y = std::get<MlccCapacitorModel>(b);
    return x->c0 == y.c0 && x->c_inf == y.c_inf && x->v0 == y.v0;
  }
  const auto& x = std::get<ShockleyDiodeModel>(a);
  const auto& y = std::get<ShockleyDiodeModel>(b);
  return x.i_s == y.i_s && x.n_ideality == y.n_ideality && x.v_t == y.v_t && x.r_series == y.r_series;
}

bool same_payload(const ElementPayload& a, const ElementPayload& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<ElementModel>(&a)) return same_model(*x, std::get<ElementModel>(b));
  if (const auto* x = std::get_if<DatasetRef>(&a)) return x->path == std::get<DatasetRef>(b).path;
  return true;
}

bool same_waveform(const std::optional<SourceWaveform>& a, const std::optional<SourceWaveform>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->kind == b->kind && a->dc_value == b->dc_value && a->offset == b->offset &&
         a->amplitude == b->amplitude && a->frequency_hz == b->frequency_hz;
}

} // namespace

bool operator==(const ElementDecl& a, const ElementDecl& b) {
  return a.name == b.name && a.kind == b.kind && a.node_pos == b.node_pos && a.node_neg == b.node_neg &&
         same_payload(a.payload, b.payload) && same_waveform(a.waveform, b.waveform);
}

bool operator==(const CircuitGraph& a, const CircuitGraph& b) {
  return a.nodes == b.nodes && a.elements == b.elements && a.g == b.g && a.c == b.c && a.l == b.l && a.v == b.v &&
         a.i == b.i;
}

IncidenceSet build_incidence(const CircuitGraph& graph) {
  std::map<std::string, Eigen::Index> row;
  for (std::size_t k = 0; k < graph.nodes.size(); ++k) row[graph.nodes[k]] = static_cast<Eigen::Index>(k);
  const auto rows = static_cast<Eigen::Index>(graph.nodes.size());

  auto fill = [&](const std::vector<std::size_t>& group) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(group.size()));
    for (std::size_t j = 0; j < group.size(); ++j) {
      const auto& e = graph.elements[group[j]];
      if (e.node_pos != "0") a(row.at(e.node_pos), static_cast<Eigen::Index>(j)) = 1.0;
      if (e.node_neg != "0") a(row.at(e.node_neg), static_cast<Eigen::Index>(j)) = -1.0;
    }
    return a;
  };
  return {fill(graph.g), fill(graph.c), fill(graph.l), fill(graph.v), fill(graph.i)};
}

} // namespace ddmna
