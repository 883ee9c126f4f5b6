#include "ddmna/bindings.hpp"

#include "ddmna/error.hpp"

#include <filesystem>
#include <iostream>

namespace ddmna {

DataBinding DataBinding::from(MeasurementSet set) {
  set.validate();
  auto shared = std::make_shared<const MeasurementSet>(std::move(set));
  auto index = std::make_shared<const NearestIndex>(*shared);
  return {std::move(shared), std::move(index)};
}

const std::vector<ElementBinding>& CircuitBindings::group(BranchClass cls) const {
  switch (cls) {
  case BranchClass::C: return c;
  case BranchClass::L: return l;
  case BranchClass::G: return g;
  default: throw Error("sources have no binding");
  }
}

std::vector<ElementBinding>& CircuitBindings::group(BranchClass cls) {
  return const_cast<std::vector<ElementBinding>&>(std::as_const(*this).group(cls));
}

bool CircuitBindings::all_known() const { return data_driven_count() == 0; }

std::size_t CircuitBindings::data_driven_count() const {
  std::size_t n = 0;
  for (const auto* grp : {&g, &c, &l})
    for (const auto& b : *grp) n += b.known() ? 0 : 1;
  return n;
}

std::size_t CircuitBindings::total_measurements() const {
  std::size_t n = 0;
  for (const auto* grp : {&g, &c, &l})
    for (const auto& b : *grp)
      if (!b.known()) n += b.data().set->size();
  return n;
}

CircuitBindings bind_circuit(const CircuitGraph& graph, const std::string& base_dir) {
  CircuitBindings out;
  for (auto cls : {BranchClass::G, BranchClass::C, BranchClass::L}) {
    auto& dst = out.group(cls);
    for (std::size_t idx : graph.group(cls)) {
      const auto& e = graph.elements[idx];
      if (const auto* model = e.model()) {
        dst.push_back({*model});
        continue;
      }
      const auto& ref = std::get<DatasetRef>(e.payload);
      std::filesystem::path p(ref.path);
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      std::size_t dups = 0;
      MeasurementSet set = read_measurements_file(p.string(), &dups);
      if (dups > 0) std::cerr << "warning: " << e.name << ": dropped " << dups << " duplicate measurement pairs\n";
      if (set.kind != pair_kind(cls))
        throw ConfigError("dataset for " + e.name + " has the wrong header for its element kind");
      dst.push_back({DataBinding::from(std::move(set))});
    }
  }
  return out;
}

void bind_data(const CircuitGraph& graph, CircuitBindings& bindings, std::string_view name, MeasurementSet set) {
  const std::size_t idx = graph.find(name);
  if (idx == CircuitGraph::npos) throw ConfigError("unknown element '" + std::string(name) + "'");
  const auto cls = branch_class(graph.elements[idx].kind);
  if (cls == BranchClass::V || cls == BranchClass::I) throw ConfigError("sources cannot be data-driven");
  if (set.kind != pair_kind(cls)) throw ConfigError("dataset kind does not match element " + std::string(name));
  bindings.group(cls)[graph.column_of(idx)] = ElementBinding{DataBinding::from(std::move(set))};
}

} // namespace ddmna
