#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cgrakit/arch.hpp"
#include "cgrakit/dfg.hpp"
#include "cgrakit/json_util.hpp"

namespace cgrakit {

struct DataPlacement {
  int bank = 0;
  int64_t base = 0;    // byte address within the bank
  int64_t extent = 0;  // bytes
  int elem_bytes = 2;
  bool operator==(const DataPlacement&) const = default;
};

struct DataLayout {
  std::map<std::string, DataPlacement> arrays;
  std::vector<std::string> scalar_order;  // packed 2 bytes each at bank 0, offset 0
  std::map<int, int64_t> bank_occupancy;

  int64_t scalar_header_bytes() const { return 2 * static_cast<int64_t>(scalar_order.size()); }
  int bank_of(const std::string& array) const;
};

enum class LayoutPolicy { GreedyBalanced };

class CapacityExceeded : public SemanticError {
 public:
  CapacityExceeded(const std::string& object, const std::string& what)
      : SemanticError(what), object(object) {}
  std::string object;
};

// Largest object first into the least-loaded bank (ties by bank id);
// addresses packed ascending, aligned to the element width. Scalar live-ins
// occupy a reserved header at bank 0 offset 0.
DataLayout assign_banks(const DFG& dfg, const ArchSpec& spec,
                        LayoutPolicy policy = LayoutPolicy::GreedyBalanced);

struct Mapping;  // mapper.hpp

// Every LOAD/STORE must sit on a PE whose mem_access covers its array's bank.
std::vector<Diagnostic> check_affinity(const Mapping& mapping, const DFG& dfg,
                                       const DataLayout& layout, const ArchSpec& spec);

json layout_to_json(const DataLayout& layout);
DataLayout layout_from_json(const json& j);

}  // namespace cgrakit
