#pragma once

#include "ddmna/elements.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ddmna {

enum class ElementKind { Resistor, Capacitor, Inductor, VSource, ISource, Diode };

/// Reference to a measurement CSV; the path is kept as written in the netlist.
struct DatasetRef {
  std::string path;
};

using ElementPayload = std::variant<std::monostate, ElementModel, DatasetRef>;

struct ElementDecl {
  std::string name;
  ElementKind kind = ElementKind::Resistor;
  std::string node_pos;
  std::string node_neg;
  ElementPayload payload;                 // passive elements only
  std::optional<SourceWaveform> waveform; // sources only

  bool is_data_driven() const { return std::holds_alternative<DatasetRef>(payload); }
  const ElementModel* model() const { return std::get_if<ElementModel>(&payload); }
};

/// Role of an element in the MNA equations. Diodes are conductive (G) elements.
enum class BranchClass { G, C, L, V, I };

BranchClass branch_class(ElementKind kind);

/// Parsed, validated circuit. Node 0 is ground and is not stored in `nodes`.
struct CircuitGraph {
  std::vector<std::string> nodes; // non-ground nodes in order of first appearance
  std::vector<ElementDecl> elements;

  // Element indices per branch class, in netlist order. Column j of A_X is group_X[j].
  std::vector<std::size_t> g, c, l, v, i;

  std::size_t node_count() const { return nodes.size() + 1; }
  std::size_t n_g() const { return g.size(); }
  std::size_t n_c() const { return c.size(); }
  std::size_t n_l() const { return l.size(); }
  std::size_t n_v() const { return v.size(); }
  std::size_t n_src() const { return i.size(); }

  const std::vector<std::size_t>& group(BranchClass cls) const;
  /// Index into `elements` for a name, or npos.
  std::size_t find(std::string_view name) const;
  /// Column position of an element inside its branch-class group.
  std::size_t column_of(std::size_t element_index) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

bool operator==(const ElementDecl& a, const ElementDecl& b);
bool operator==(const CircuitGraph& a, const CircuitGraph& b);

/// Reduced incidence matrices. Rows follow CircuitGraph::nodes.
struct IncidenceSet {
  Eigen::MatrixXd a_g, a_c, a_l, a_v, a_i;

  Eigen::Index rows() const { return a_g.rows(); }
};

CircuitGraph parse_netlist(std::string_view text);
CircuitGraph parse_netlist_file(const std::string& path);

/// Re-emits a graph in netlist syntax; parse_netlist(to_netlist(g)) == g.
std::string to_netlist(const CircuitGraph& graph);

IncidenceSet build_incidence(const CircuitGraph& graph);

} // namespace ddmna
