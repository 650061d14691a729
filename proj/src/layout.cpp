#include "cgrakit/layout.hpp"

#include <algorithm>

#include "cgrakit/mapper.hpp"

namespace cgrakit {

int DataLayout::bank_of(const std::string& array) const {
  auto it = arrays.find(array);
  return it == arrays.end() ? -1 : it->second.bank;
}

DataLayout assign_banks(const DFG& dfg, const ArchSpec& spec, LayoutPolicy policy) {
  (void)policy;
  if (spec.banks.empty()) {
    if (!dfg.arrays_in.empty() || !dfg.arrays_out.empty())
      throw CapacityExceeded("", "assign_banks: the architecture has no memory banks");
    return {};
  }

  DataLayout layout;
  layout.scalar_order = dfg.scalars;
  std::vector<int> bank_ids;
  for (const auto& b : spec.banks) {
    bank_ids.push_back(b.id);
    layout.bank_occupancy[b.id] = 0;
  }
  std::sort(bank_ids.begin(), bank_ids.end());
  layout.bank_occupancy[bank_ids.front()] = layout.scalar_header_bytes();

  // Collect distinct arrays (an array may be both live-in and live-out).
  std::vector<ArrayDecl> objects;
  auto add_obj = [&](const ArrayDecl& a) {
    for (const auto& o : objects)
      if (o.name == a.name) {
        if (o != a)
          throw SemanticError("assign_banks: array \"" + a.name + "\" declared twice with different shapes");
        return;
      }
    objects.push_back(a);
  };
  for (const auto& a : dfg.arrays_in) add_obj(a);
  for (const auto& a : dfg.arrays_out) add_obj(a);

  std::stable_sort(objects.begin(), objects.end(), [](const ArrayDecl& a, const ArrayDecl& b) {
    if (a.extent_bytes() != b.extent_bytes()) return a.extent_bytes() > b.extent_bytes();
    return a.name < b.name;
  });

  for (const auto& obj : objects) {
    int best_bank = -1;
    int64_t best_load = 0;
    for (int id : bank_ids) {
      int64_t load = layout.bank_occupancy[id];
      if (best_bank < 0 || load < best_load) {
        best_bank = id;
        best_load = load;
      }
    }
    const BankSpec* bank = spec.bank_by_id(best_bank);
    int64_t base = best_load;
    if (base % obj.elem_bytes != 0) base += obj.elem_bytes - base % obj.elem_bytes;
    int64_t extent = obj.extent_bytes();
    if (base + extent > bank->size_bytes)
      throw CapacityExceeded(obj.name, "assign_banks: array \"" + obj.name + "\" (" +
                                           std::to_string(extent) + " B) does not fit in bank " +
                                           std::to_string(best_bank));
    layout.arrays[obj.name] = DataPlacement{best_bank, base, extent, obj.elem_bytes};
    layout.bank_occupancy[best_bank] = base + extent;
  }
  return layout;
}

std::vector<Diagnostic> check_affinity(const Mapping& mapping, const DFG& dfg,
                                       const DataLayout& layout, const ArchSpec& spec) {
  std::vector<Diagnostic> out;
  for (const auto& node : dfg.nodes) {
    if (!is_memory_op(node.opcode)) continue;
    auto it = mapping.placements.find(node.id);
    if (it == mapping.placements.end()) {
      out.push_back({Severity::Error, "node " + std::to_string(node.id), "memory op is not placed"});
      continue;
    }
    int bank = layout.bank_of(node.array_ref->array);
    const PESpec& pe = spec.pe_at(it->second.pe);
    if (std::find(pe.mem_access.begin(), pe.mem_access.end(), bank) == pe.mem_access.end())
      out.push_back({Severity::Error, "node " + std::to_string(node.id),
                     "placed on pe[" + std::to_string(it->second.pe.row) + "][" +
                         std::to_string(it->second.pe.col) + "] which cannot reach bank " +
                         std::to_string(bank)});
  }
  return out;
}

json layout_to_json(const DataLayout& layout) {
  json arrays = json::object();
  for (const auto& [name, p] : layout.arrays)
    arrays[name] = json{{"bank", p.bank}, {"base", p.base}, {"extent", p.extent},
                        {"elem_bytes", p.elem_bytes}};
  return json{{"arrays", arrays}, {"scalars", layout.scalar_order}};
}

DataLayout layout_from_json(const json& j) {
  DataLayout layout;
  if (j.contains("scalars")) layout.scalar_order = j["scalars"].get<std::vector<std::string>>();
  if (j.contains("arrays")) {
    for (auto it = j["arrays"].begin(); it != j["arrays"].end(); ++it) {
      DataPlacement p;
      p.bank = it.value().at("bank").get<int>();
      p.base = it.value().at("base").get<int64_t>();
      p.extent = it.value().at("extent").get<int64_t>();
      p.elem_bytes = it.value().at("elem_bytes").get<int>();
      layout.arrays[it.key()] = p;
      layout.bank_occupancy[p.bank] = std::max(layout.bank_occupancy[p.bank], p.base + p.extent);
    }
  }
  return layout;
}

}  // namespace cgrakit
