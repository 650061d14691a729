#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgrakit/arch.hpp"
#include "cgrakit/dfg.hpp"
#include "cgrakit/layout.hpp"
#include "cgrakit/mapper.hpp"

namespace cgrakit {

// Cycle-by-cycle per-resource configuration. Slot records follow two clock
// conventions:
//  - FU operand selects are read at the issue cycle (slot = issue mod II).
//  - Port/reg latch records execute at the end of their slot's cycle; the
//    landed value is visible from the following cycle.

struct OperandCfg {
  std::string kind;  // "port" | "reg" | "fu_out" | "imm" | "scalar"
  std::string port;
  int reg = -1;
  int64_t imm = 0;
  std::string scalar;
  int distance = 0;  // loop-carried distance of the feeding edge
  bool has_init = false;
  CarriedInit init;  // operand value for the first `distance` firings
};

struct LatchSrc {
  std::string kind;  // "fu" | "port" | "reg" | "link"
  std::string port;  // port: local port name; link: remote port name
  int reg = -1;
  int row = 0, col = 0;  // link: remote PE
};

struct FuCfg {
  int node = -1;
  std::string op;
  int stage = 0;
  std::vector<OperandCfg> operands;
  std::string array;  // memory ops
  int bank = -1;
  int bank_port = -1;
};

struct PortLatchCfg {
  std::string port;
  LatchSrc src;
};

struct RegLatchCfg {
  int reg = -1;
  LatchSrc src;
};

struct SlotCfg {
  std::optional<FuCfg> fu;
  std::vector<PortLatchCfg> ports;
  std::vector<RegLatchCfg> regs;
};

struct PEConfig {
  PECoord pe;
  std::vector<SlotCfg> slots;  // size II
};

struct ConfigProgram {
  int ii = 1;
  int schedule_depth = 0;
  int stages = 1;
  uint64_t adl_hash = 0;
  std::string dfg_name;
  int64_t trip_count = 1;
  int64_t invocations = 1;
  std::vector<std::string> scalars;
  DataLayout layout;
  std::optional<KernelParams> kernel;
  std::vector<PEConfig> pes;  // row-major over the grid
};

ConfigProgram emit_config(const Mapping& m, const DFG& dfg, const ArchSpec& spec,
                          const DataLayout& layout);

std::string serialize_config(const ConfigProgram& cfg);
ConfigProgram parse_config(const std::string& text);

}  // namespace cgrakit
