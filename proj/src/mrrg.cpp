#include "cgrakit/mrrg.hpp"

#include <algorithm>
#include <sstream>

namespace cgrakit {

MRRG build_mrrg(const ResourceGraph& rg, int ii) {
  if (ii < 1) throw SemanticError("build_mrrg: II must be >= 1");
  MRRG m;
  m.ii = ii;
  m.rg = &rg;
  m.out_edges.resize(rg.nodes.size() * ii);
  for (const auto& e : rg.edges) {
    for (int t = 0; t < ii; ++t) {
      MRRG::Edge me;
      me.src_slot = m.slot(e.src, t);
      me.dst_slot = m.slot(e.dst, (t + e.delay) % ii);
      me.wraps = t + e.delay >= ii;
      m.out_edges[me.src_slot].push_back(static_cast<int>(m.edges.size()));
      m.edges.push_back(me);
    }
  }
  return m;
}

std::string mrrg_to_dot(const MRRG& m) {
  std::ostringstream os;
  os << "digraph mrrg {\n";
  for (size_t r = 0; r < m.rg->nodes.size(); ++r)
    for (int t = 0; t < m.ii; ++t)
      os << "  \"" << m.rg->nodes[r].label << "@" << t << "\";\n";
  for (const auto& e : m.edges) {
    os << "  \"" << m.rg->nodes[m.resource_of(e.src_slot)].label << "@" << m.time_of(e.src_slot)
       << "\" -> \"" << m.rg->nodes[m.resource_of(e.dst_slot)].label << "@"
       << m.time_of(e.dst_slot) << "\"";
    if (e.wraps) os << " [style=dashed]";
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

MIIReport compute_mii(const DFG& dfg, const ArchSpec& spec) {
  // Every FU opcode must be supported somewhere.
  std::map<std::string, int> latency;
  for (size_t i = 0; i < dfg.nodes.size(); ++i) {
    const auto& n = dfg.nodes[i];
    if (is_pseudo_op(n.opcode)) continue;
    bool supported = false;
    int max_lat = 0;
    for (int r = 0; r < spec.rows; ++r)
      for (int c = 0; c < spec.cols; ++c) {
        const PESpec& pe = spec.pe_at({r, c});
        if (pe.supports(n.opcode)) {
          supported = true;
          max_lat = std::max(max_lat, pe.latency(n.opcode));
        }
      }
    if (!supported)
      throw SemanticError("compute_mii: opcode " + n.opcode + " (node " +
                          std::to_string(n.id) + ") is unsupported by every PE");
    latency[n.opcode] = max_lat;
  }

  MIIReport r;
  int fu_ops = dfg.fu_node_count();
  int pes = spec.pe_count();
  r.res_mii_compute = std::max(1, (fu_ops + pes - 1) / pes);
  int mem_ops = dfg.memory_op_count();
  int ports = spec.total_bank_ports();
  if (mem_ops > 0) {
    if (ports == 0)
      throw SemanticError("compute_mii: the DFG has memory ops but the architecture has no banks");
    r.res_mii_memory = std::max(1, (mem_ops + ports - 1) / ports);
  }
  r.rec_mii = 1;
  for (const auto& cyc : enumerate_recurrences(dfg, latency)) {
    int ii = (cyc.total_latency + cyc.total_distance - 1) / cyc.total_distance;
    r.rec_mii = std::max(r.rec_mii, ii);
  }
  r.mii = std::max({r.res_mii_compute, r.res_mii_memory, r.rec_mii});
  return r;
}

}  // namespace cgrakit
