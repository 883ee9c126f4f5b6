#pragma once

#include "ddmna/dataset.hpp"
#include "ddmna/netlist.hpp"
#include "ddmna/nn_index.hpp"

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace ddmna {

/// A measurement set together with its search index.
struct DataBinding {
  std::shared_ptr<const MeasurementSet> set;
  std::shared_ptr<const NearestIndex> index;

  static DataBinding from(MeasurementSet set);
};

/// How one passive element enters the solvers: a known model or measurement data.
struct ElementBinding {
  std::variant<ElementModel, DataBinding> mode;

  bool known() const { return std::holds_alternative<ElementModel>(mode); }
  const ElementModel& model() const { return std::get<ElementModel>(mode); }
  const DataBinding& data() const { return std::get<DataBinding>(mode); }
};

struct CircuitBindings {
  std::vector<ElementBinding> g, c, l;

  const std::vector<ElementBinding>& group(BranchClass cls) const;
  std::vector<ElementBinding>& group(BranchClass cls);
  bool all_known() const;
  std::size_t data_driven_count() const;
  std::size_t total_measurements() const;
};

/// Bindings as declared in the netlist. DATA paths are resolved against `base_dir`.
CircuitBindings bind_circuit(const CircuitGraph& graph, const std::string& base_dir = ".");

/// Replaces the binding of a named element by measurement data.
void bind_data(const CircuitGraph& graph, CircuitBindings& bindings, std::string_view name, MeasurementSet set);

} // namespace ddmna
