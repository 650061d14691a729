#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgrakit/diagnostics.hpp"
#include "cgrakit/json_util.hpp"

namespace cgrakit {

// Opcode strings: ADD SUB MUL SHL SHR AND OR XOR CMP_EQ CMP_NE CMP_LT CMP_LE
// CMP_GT CMP_GE SEL LOAD STORE NOP, plus the pseudo ops CONST, LIVE_IN and
// the structured-conditional pair BR / PHI consumed by lower_conditionals.

enum class EdgeKind { Data, Predicate, MemoryOrder };

struct ConstOperand {
  int index = 0;   // operand slot the immediate binds to
  int64_t value = 0;
  bool operator==(const ConstOperand&) const = default;
};

struct ArrayRef {
  std::string array;
  std::string index_expr;  // descriptive affine expression, e.g. "2*(i*TK+k)"
  bool operator==(const ArrayRef&) const = default;
};

struct DFGNode {
  int id = 0;
  std::string opcode;
  std::optional<ConstOperand> const_operand;
  std::optional<ArrayRef> array_ref;  // LOAD/STORE only
  std::string scalar;                 // LIVE_IN only: scalar live-in name
  bool operator==(const DFGNode&) const = default;
};

// Initial value fed to a consumer for the first `distance` iterations of a
// loop-carried edge: a literal or a per-invocation scalar live-in.
struct CarriedInit {
  bool is_scalar = false;
  int64_t imm = 0;
  std::string scalar;
  bool operator==(const CarriedInit&) const = default;
};

struct DFGEdge {
  int src = 0;
  int dst = 0;
  int operand_index = 0;
  int distance = 0;
  EdgeKind kind = EdgeKind::Data;
  std::optional<CarriedInit> init;
  bool operator==(const DFGEdge&) const = default;
};

struct ArrayDecl {
  std::string name;
  std::vector<int> dims;
  int elem_bytes = 2;
  bool operator==(const ArrayDecl&) const = default;
  int64_t extent_bytes() const {
    int64_t n = elem_bytes;
    for (int d : dims) n *= d;
    return n;
  }
};

// Generator provenance recorded in the DFG file so that bundles and run
// plans can be rebuilt without re-specifying the kernel.
struct KernelParams {
  std::string kernel;   // "gemm" | "conv"
  std::string variant;  // gemm: base|u|u-c ; conv: base|uc1|uc2
  // GEMM tile and problem dims.
  int ti = 0, tj = 0, tk = 0, unroll = 4;
  int m = 0, n = 0, kdim = 0;
  // CONV tile and problem dims.
  int to1 = 0, to2 = 0, tco = 0, k = 0;
  int o1 = 0, o2 = 0, co = 0;
  int clusters = 4;
  bool operator==(const KernelParams&) const = default;
};

struct DFG {
  std::string name;
  std::vector<DFGNode> nodes;
  std::vector<DFGEdge> edges;
  std::vector<ArrayDecl> arrays_in;   // array live-ins
  std::vector<ArrayDecl> arrays_out;  // array live-outs
  std::vector<std::string> scalars;   // scalar live-ins, header order
  int64_t trip_count = 1;
  int64_t invocations = 1;
  std::optional<KernelParams> kernel;

  const DFGNode* node_by_id(int id) const;
  const ArrayDecl* array_decl(const std::string& name) const;
  bool is_fu_op(int node_index) const;  // false for CONST / LIVE_IN pseudo nodes
  int fu_node_count() const;
  int memory_op_count() const;
  std::vector<int> operand_arity() const;  // per node index
};

int opcode_arity(const std::string& opcode);
bool is_memory_op(const std::string& opcode);
bool is_pseudo_op(const std::string& opcode);  // CONST, LIVE_IN, BR, PHI

std::vector<Diagnostic> validate_dfg(const DFG& dfg);

// Topological order of the distance-0 subgraph; throws SemanticError if that
// subgraph has a cycle.
std::vector<int> topo_order_distance0(const DFG& dfg);

struct Recurrence {
  std::vector<int> node_ids;  // cycle, in traversal order
  int total_latency = 0;
  int total_distance = 0;
};

// All elementary cycles of the full graph (distance > 0 edges included).
// Parallel edges between the same node pair yield one cycle per combination.
std::vector<Recurrence> enumerate_recurrences(const DFG& dfg);
std::vector<Recurrence> enumerate_recurrences(const DFG& dfg,
                                              const std::map<std::string, int>& latency);

// max over cycles of ceil(total_latency / total_distance); 1 for acyclic.
int rec_mii(const DFG& dfg);

DFG parse_dfg(const std::string& text);
std::string serialize_dfg(const DFG& dfg);

json kernel_params_to_json(const KernelParams& p);
KernelParams kernel_params_from_json(const json& j);

// Rewrites BR/PHI structured conditionals into CMP + SEL dataflow.
DFG lower_conditionals(const DFG& dfg);

// ---------------------------------------------------------------------------
// Reference interpreter: executes the DFG iteration by iteration over named
// arrays, honoring loop-carried distances and width-wrapped arithmetic.
// ---------------------------------------------------------------------------

struct InterpState {
  std::map<std::string, std::vector<uint8_t>> arrays;  // raw little-endian bytes
  std::map<std::string, int64_t> scalars;
};

void run_dfg(const DFG& dfg, InterpState& state, int64_t trip_count, int data_width = 16);

int64_t wrap_width(int64_t v, int data_width);
int64_t eval_op(const std::string& opcode, const std::vector<int64_t>& operands, int data_width);

// ---------------------------------------------------------------------------
// Kernel generators (16-bit element kernels)
// ---------------------------------------------------------------------------

DFG gen_gemm(const KernelParams& p);
DFG gen_conv(const KernelParams& p);
DFG gen_kernel(const KernelParams& p);

// Scalar live-in values for each kernel invocation, in dfg.scalars order.
// Requires problem dims == tile dims and clusters == 1 (desk-scale runs).
std::vector<std::map<std::string, int64_t>> build_run_plan(const DFG& dfg);
std::vector<std::map<std::string, int64_t>> build_run_plan(
    const std::optional<KernelParams>& kernel, const std::vector<std::string>& scalars,
    int64_t invocations);

}  // namespace cgrakit
