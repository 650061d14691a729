#pragma once

#include <string>
#include <vector>

#include "cgrakit/arch.hpp"
#include "cgrakit/dfg.hpp"

namespace cgrakit {

// Modulo routing resource graph: the resource graph replicated over II time
// steps, every edge advanced by its delay modulo II.
struct MRRG {
  int ii = 1;
  const ResourceGraph* rg = nullptr;

  struct Edge {
    int src_slot;
    int dst_slot;
    bool wraps;  // t + delay >= II
  };
  std::vector<Edge> edges;
  std::vector<std::vector<int>> out_edges;  // slot -> edge indices

  int slot(int resource, int t) const { return resource * ii + t; }
  int resource_of(int slot) const { return slot / ii; }
  int time_of(int slot) const { return slot % ii; }
  int slot_count() const { return static_cast<int>(rg->nodes.size()) * ii; }
};

MRRG build_mrrg(const ResourceGraph& rg, int ii);
std::string mrrg_to_dot(const MRRG& m);

struct MIIReport {
  int res_mii_compute = 1;  // ceil(FU ops / PEs)
  int res_mii_memory = 1;   // ceil(memory ops / total bank ports)
  int rec_mii = 1;          // max over recurrence cycles of ceil(lat/dist)
  int mii = 1;
};

// Throws SemanticError if some opcode is unsupported by every PE.
MIIReport compute_mii(const DFG& dfg, const ArchSpec& spec);

}  // namespace cgrakit
