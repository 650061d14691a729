#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cgrakit/arch.hpp"
#include "cgrakit/dfg.hpp"
#include "cgrakit/layout.hpp"
#include "cgrakit/mrrg.hpp"

namespace cgrakit {

struct Placement {
  PECoord pe;
  int t = 0;  // absolute start cycle within the schedule frame
  bool operator==(const Placement&) const = default;
};

// One storage (port register or register-file entry) per consecutive cycle
// from producer exit to consumer read. An empty step list is the same-PE
// fu_out bypass, legal only when the consumer starts right after the
// producer's last execution cycle.
struct RouteStep {
  int resource = -1;  // ResourceGraph node id (Port or Reg)
  int abs_time = 0;
};

struct Route {
  std::vector<RouteStep> steps;
  int arrival = 0;  // consumer start + distance * II
};

struct Mapping {
  int ii = 1;
  std::map<int, Placement> placements;  // node id -> slot
  std::map<int, Route> routes;          // dfg edge index -> route (data/predicate)
  std::map<int, int> bank_port;         // memory node id -> port index within its bank
  int schedule_depth = 0;               // max over nodes of start + latency
};

struct MapperParams {
  uint64_t seed = 0;
  int max_ii = 0;  // 0: defaults to 4*mii + 8
  double initial_temp = 3.0;
  double cooling = 0.985;
  int iters_per_ii = 0;  // SA moves per II attempt; 0: scaled from DFG size
  double congestion_growth = 1.35;
  int max_rounds = 24;
  bool verbose = false;
};

struct IIAttempt {
  int ii = 0;
  bool success = false;
  std::string reason;
};

struct MapResult {
  bool ok = false;
  Mapping mapping;
  DataLayout layout;
  MIIReport mii;
  std::vector<IIAttempt> attempts;
  std::string error;
};

// ---------------------------------------------------------------------------
// Pseudo-node folding: CONST and LIVE_IN producers become immediate/scalar
// operand feeds; every remaining feed is a routed edge.
// ---------------------------------------------------------------------------

struct OperandFeed {
  enum Kind { Route, Imm, Scalar } kind = Imm;
  int edge_index = -1;  // Route
  int src_id = -1;      // Route
  int distance = 0;
  bool has_init = false;
  CarriedInit init;
  int64_t imm = 0;      // Imm
  std::string scalar;   // Scalar
};

struct FoldedDFG {
  std::vector<int> placeable;                     // node ids needing FU slots
  std::map<int, std::vector<OperandFeed>> feeds;  // node id -> per operand slot
  std::vector<int> routed_edges;                  // edge indices requiring routes
  std::map<int, std::vector<int>> nets;           // producer id -> routed edge indices
};

FoldedDFG fold_dfg(const DFG& dfg);  // throws SemanticError on BR/PHI nodes

// ---------------------------------------------------------------------------

MapResult map_dfg(const DFG& dfg, const ArchSpec& spec, const MapperParams& params = {});

std::optional<Mapping> place_and_route(const DFG& dfg, const ArchSpec& spec,
                                       const ResourceGraph& rg, const DataLayout& layout,
                                       int ii, const MapperParams& params,
                                       std::string* fail_reason = nullptr);

std::vector<Diagnostic> verify_mapping(const Mapping& m, const DFG& dfg, const ArchSpec& spec,
                                       const ResourceGraph& rg, const DataLayout& layout);

double utilization(const Mapping& m, const DFG& dfg, const ArchSpec& spec);
double utilization_percent(int fu_nodes, int ii, int pes);

}  // namespace cgrakit
