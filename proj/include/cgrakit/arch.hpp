#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cgrakit/diagnostics.hpp"

namespace cgrakit {

struct PECoord {
  int row = 0;
  int col = 0;
  auto operator<=>(const PECoord&) const = default;
};

struct RouterSpec {
  bool crossbar = true;
  std::vector<std::string> inputs{"N", "E", "S", "W"};
  std::vector<std::string> outputs{"N", "E", "S", "W"};
  bool operator==(const RouterSpec&) const = default;

  // One routing resource per distinct port name (a port register can be
  // both a link landing slot and a link driver).
  std::vector<std::string> port_names() const;
};

struct PESpec {
  std::vector<std::string> fu_ops;
  std::map<std::string, int> op_latency;  // cycles >= 1, keys subset of fu_ops
  int regfile_size = 4;
  RouterSpec router;
  std::vector<int> mem_access;  // bank ids this PE can issue LOAD/STORE to
  bool operator==(const PESpec&) const = default;

  bool supports(const std::string& op) const;
  int latency(const std::string& op) const;  // falls back to the default table
};

struct BankSpec {
  int id = 0;
  int size_bytes = 8192;
  int ports_per_cycle = 1;
  std::vector<PECoord> connected_pes;
  bool operator==(const BankSpec&) const = default;
};

struct Link {
  PECoord src;
  std::string src_port;
  PECoord dst;
  std::string dst_port;
  bool operator==(const Link&) const = default;
};

struct ArchSpec {
  std::string name;
  int rows = 1;
  int cols = 1;
  int data_width = 16;  // bits; one of 8/16/32
  PESpec pe_defaults;
  std::map<PECoord, PESpec> pe_overrides;
  std::vector<Link> interconnect;
  std::vector<BankSpec> banks;
  bool operator==(const ArchSpec&) const = default;

  int pe_count() const { return rows * cols; }
  bool in_grid(PECoord c) const {
    return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
  }
  const PESpec& pe_at(PECoord c) const;
  const BankSpec* bank_by_id(int id) const;
  int total_bank_ports() const;
};

struct TemplateOptions {
  int regfile_size = 4;
  int data_width = 16;
  int bank_size_bytes = 8192;
  int bank_ports = 1;
};

// Default operation latency table used when a PE spec does not override it:
// MUL and LOAD take 2 cycles, everything else 1.
int default_latency(const std::string& op);
const std::vector<std::string>& compute_opcodes();  // template FU opset, no mem ops

ArchSpec generate_template(int rows, int cols, TemplateOptions opts = {});
std::vector<Diagnostic> validate(const ArchSpec& spec);

ArchSpec parse_adl(const std::string& text);
std::string serialize_adl(const ArchSpec& spec);
uint64_t adl_content_hash(const ArchSpec& spec);

// ---------------------------------------------------------------------------
// Per-cycle routing substrate expanded from an ArchSpec.
//
// Node kinds:
//   Fu       - one issue slot per PE
//   Port     - one slot per distinct router port name per PE
//   Reg      - one slot per register file entry
//   BankPort - one slot per bank access port
//
// Edge delays: every hop that lands a value in a storage slot (port register
// or register file entry) takes one cycle; reading a local slot into the FU
// is combinational (delay 0). An FU's own result is consumable one cycle
// after the producing operation's last execution cycle.
// ---------------------------------------------------------------------------

enum class ResKind { Fu, Port, Reg, BankPort };

struct ResourceNode {
  ResKind kind = ResKind::Fu;
  PECoord pe;      // valid for Fu/Port/Reg
  int index = 0;   // port name index / register index / bank port index
  int bank = -1;   // valid for BankPort
  std::string label;
};

struct ResourceEdge {
  int src = 0;
  int dst = 0;
  int delay = 0;  // 0 or 1
};

struct ResourceGraph {
  std::vector<ResourceNode> nodes;
  std::vector<ResourceEdge> edges;
  std::vector<std::vector<int>> out_edges;  // node -> edge indices

  // Lookup tables.
  std::map<PECoord, int> fu_of;
  std::map<std::pair<PECoord, int>, int> port_of;  // (pe, port name idx)
  std::map<std::pair<PECoord, int>, int> reg_of;   // (pe, reg idx)
  std::map<int, std::vector<int>> bank_ports_of;   // bank id -> node ids
  std::map<PECoord, std::vector<std::string>> port_names_of;

  int port_index(PECoord pe, const std::string& name) const;
};

ResourceGraph build_resource_graph(const ArchSpec& spec);

}  // namespace cgrakit
