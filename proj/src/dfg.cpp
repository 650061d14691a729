#include "cgrakit/dfg.hpp"

#include <algorithm>
#include <set>

#include "cgrakit/arch.hpp"
#include "cgrakit/json_util.hpp"

namespace cgrakit {

int opcode_arity(const std::string& opcode) {
  if (opcode == "SEL") return 3;
  if (opcode == "LOAD") return 1;
  if (opcode == "STORE") return 2;  // (offset, value)
  if (opcode == "CONST" || opcode == "LIVE_IN" || opcode == "NOP") return 0;
  if (opcode == "BR") return 1;
  if (opcode == "PHI") return 3;  // (then, else, predicate)
  return 2;
}

bool is_memory_op(const std::string& opcode) { return opcode == "LOAD" || opcode == "STORE"; }

bool is_pseudo_op(const std::string& opcode) {
  return opcode == "CONST" || opcode == "LIVE_IN" || opcode == "BR" || opcode == "PHI";
}

const DFGNode* DFG::node_by_id(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

const ArrayDecl* DFG::array_decl(const std::string& name) const {
  for (const auto& a : arrays_in)
    if (a.name == name) return &a;
  for (const auto& a : arrays_out)
    if (a.name == name) return &a;
  return nullptr;
}

bool DFG::is_fu_op(int node_index) const { return !is_pseudo_op(nodes[node_index].opcode); }

int DFG::fu_node_count() const {
  int n = 0;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (is_fu_op(static_cast<int>(i))) ++n;
  return n;
}

int DFG::memory_op_count() const {
  int n = 0;
  for (const auto& node : nodes)
    if (is_memory_op(node.opcode)) ++n;
  return n;
}

std::vector<int> DFG::operand_arity() const {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(opcode_arity(n.opcode));
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<Diagnostic> validate_dfg(const DFG& dfg) {
  std::vector<Diagnostic> out;
  std::map<int, int> index_of;
  for (size_t i = 0; i < dfg.nodes.size(); ++i) {
    const auto& n = dfg.nodes[i];
    if (index_of.count(n.id))
      out.push_back({Severity::Error, "node " + std::to_string(n.id), "duplicate node id"});
    index_of[n.id] = static_cast<int>(i);
    if (is_memory_op(n.opcode)) {
      if (!n.array_ref)
        out.push_back({Severity::Error, "node " + std::to_string(n.id),
                       n.opcode + " is missing an array_ref"});
      else if (!dfg.array_decl(n.array_ref->array))
        out.push_back({Severity::Error, "node " + std::to_string(n.id),
                       "references undeclared array \"" + n.array_ref->array + "\""});
    }
    if (n.opcode == "CONST" && !n.const_operand)
      out.push_back({Severity::Error, "node " + std::to_string(n.id),
                     "CONST is missing const_operand"});
    if (n.opcode == "LIVE_IN") {
      if (n.scalar.empty())
        out.push_back({Severity::Error, "node " + std::to_string(n.id),
                       "LIVE_IN is missing a scalar name"});
      else if (std::find(dfg.scalars.begin(), dfg.scalars.end(), n.scalar) == dfg.scalars.end())
        out.push_back({Severity::Error, "node " + std::to_string(n.id),
                       "scalar \"" + n.scalar + "\" is not a declared live-in"});
    }
  }

  // Operand binding: each operand slot of each node must be fed exactly once
  // (by an edge or by the node's immediate).
  std::map<int, std::set<int>> bound;
  for (size_t i = 0; i < dfg.nodes.size(); ++i) {
    const auto& n = dfg.nodes[i];
    if (n.const_operand) bound[n.id].insert(n.const_operand->index);
  }
  for (size_t e = 0; e < dfg.edges.size(); ++e) {
    const auto& edge = dfg.edges[e];
    const std::string where = "edge " + std::to_string(e);
    if (!index_of.count(edge.src)) {
      out.push_back({Severity::Error, where, "source node " + std::to_string(edge.src) + " does not exist"});
      continue;
    }
    if (!index_of.count(edge.dst)) {
      out.push_back({Severity::Error, where, "target node " + std::to_string(edge.dst) + " does not exist"});
      continue;
    }
    if (edge.distance < 0)
      out.push_back({Severity::Error, where, "distance must be >= 0"});
    if (edge.kind == EdgeKind::MemoryOrder) {
      const DFGNode& a = dfg.nodes[index_of[edge.src]];
      const DFGNode& b = dfg.nodes[index_of[edge.dst]];
      if (!is_memory_op(a.opcode) || !is_memory_op(b.opcode) || !a.array_ref || !b.array_ref ||
          a.array_ref->array != b.array_ref->array)
        out.push_back({Severity::Error, where,
                       "memory-order edges must connect LOAD/STORE on the same array"});
      continue;
    }
    const DFGNode& dst = dfg.nodes[index_of[edge.dst]];
    int arity = opcode_arity(dst.opcode);
    if (edge.operand_index < 0 || edge.operand_index >= arity)
      out.push_back({Severity::Error, where,
                     "operand index " + std::to_string(edge.operand_index) + " out of range for " +
                         dst.opcode});
    else if (!bound[edge.dst].insert(edge.operand_index).second)
      out.push_back({Severity::Error, where,
                     "operand " + std::to_string(edge.operand_index) + " of node " +
                         std::to_string(edge.dst) + " is bound twice"});
    if (edge.distance > 0 && !edge.init)
      out.push_back({Severity::Warning, where,
                     "loop-carried edge has no initial value; 0 is assumed"});
    if (edge.init && edge.init->is_scalar &&
        std::find(dfg.scalars.begin(), dfg.scalars.end(), edge.init->scalar) == dfg.scalars.end())
      out.push_back({Severity::Error, where,
                     "init scalar \"" + edge.init->scalar + "\" is not a declared live-in"});
  }
  for (size_t i = 0; i < dfg.nodes.size(); ++i) {
    const auto& n = dfg.nodes[i];
    int arity = opcode_arity(n.opcode);
    for (int k = 0; k < arity; ++k)
      if (!bound[n.id].count(k))
        out.push_back({Severity::Error, "node " + std::to_string(n.id),
                       "operand " + std::to_string(k) + " of " + n.opcode + " is unbound"});
  }

  // The distance-0 subgraph must be a DAG.
  try {
    topo_order_distance0(dfg);
  } catch (const SemanticError&) {
    out.push_back({Severity::Error, "graph", "distance-0 subgraph has a cycle"});
  }

  if (dfg.trip_count < 1)
    out.push_back({Severity::Error, "graph", "trip_count must be >= 1"});
  return out;
}

std::vector<int> topo_order_distance0(const DFG& dfg) {
  std::map<int, int> index_of;
  for (size_t i = 0; i < dfg.nodes.size(); ++i) index_of[dfg.nodes[i].id] = static_cast<int>(i);
  std::vector<std::vector<int>> succ(dfg.nodes.size());
  std::vector<int> indeg(dfg.nodes.size(), 0);
  for (const auto& e : dfg.edges) {
    if (e.distance != 0) continue;
    if (!index_of.count(e.src) || !index_of.count(e.dst)) continue;
    succ[index_of[e.src]].push_back(index_of[e.dst]);
    indeg[index_of[e.dst]]++;
  }
  std::vector<int> ready;
  for (size_t i = 0; i < dfg.nodes.size(); ++i)
    if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
  std::sort(ready.begin(), ready.end());
  std::vector<int> order;
  while (!ready.empty()) {
    int v = ready.front();
    ready.erase(ready.begin());
    order.push_back(v);
    for (int s : succ[v])
      if (--indeg[s] == 0) ready.insert(std::lower_bound(ready.begin(), ready.end(), s), s);
  }
  if (order.size() != dfg.nodes.size())
    throw SemanticError("dfg: distance-0 subgraph has a cycle");
  return order;
}

// ---------------------------------------------------------------------------
// Cycle enumeration (Johnson's algorithm over node-elementary cycles, with
// parallel-edge expansion)
// ---------------------------------------------------------------------------

namespace {

struct CycleFinder {
  int n = 0;
  std::vector<std::vector<int>> adj;  // by node index
  std::vector<bool> blocked;
  std::vector<std::set<int>> block_map;
  std::vector<int> stack;
  std::vector<std::vector<int>> cycles;  // node-index cycles
  int start = 0;

  void unblock(int u) {
    blocked[u] = false;
    for (int w : block_map[u])
      if (blocked[w]) unblock(w);
    block_map[u].clear();
  }

  bool circuit(int v) {
    bool found = false;
    stack.push_back(v);
    blocked[v] = true;
    for (int w : adj[v]) {
      if (w < start) continue;
      if (w == start) {
        cycles.push_back(stack);
        found = true;
      } else if (!blocked[w]) {
        if (circuit(w)) found = true;
      }
    }
    if (found) {
      unblock(v);
    } else {
      for (int w : adj[v]) {
        if (w < start) continue;
        block_map[w].insert(v);
      }
    }
    stack.pop_back();
    return found;
  }

  std::vector<std::vector<int>> run() {
    for (start = 0; start < n; ++start) {
      blocked.assign(n, false);
      block_map.assign(n, {});
      stack.clear();
      circuit(start);
    }
    return cycles;
  }
};

}  // namespace

std::vector<Recurrence> enumerate_recurrences(const DFG& dfg,
                                              const std::map<std::string, int>& latency) {
  std::map<int, int> index_of;
  for (size_t i = 0; i < dfg.nodes.size(); ++i) index_of[dfg.nodes[i].id] = static_cast<int>(i);

  CycleFinder cf;
  cf.n = static_cast<int>(dfg.nodes.size());
  cf.adj.assign(cf.n, {});
  // Parallel edges collapse for node-cycle discovery; expanded afterwards.
  std::map<std::pair<int, int>, std::vector<int>> edge_groups;
  for (size_t e = 0; e < dfg.edges.size(); ++e) {
    int a = index_of.at(dfg.edges[e].src);
    int b = index_of.at(dfg.edges[e].dst);
    auto& group = edge_groups[{a, b}];
    if (group.empty()) cf.adj[a].push_back(b);
    group.push_back(static_cast<int>(e));
  }
  for (auto& a : cf.adj) std::sort(a.begin(), a.end());

  auto node_latency = [&](int idx) {
    const auto& op = dfg.nodes[idx].opcode;
    if (is_pseudo_op(op)) return 0;
    auto it = latency.find(op);
    return it == latency.end() ? default_latency(op) : it->second;
  };

  std::vector<Recurrence> out;
  for (const auto& cyc : cf.run()) {
    // Expand parallel-edge combinations along the cycle.
    std::vector<std::vector<int>> choices;
    for (size_t i = 0; i < cyc.size(); ++i) {
      int a = cyc[i];
      int b = cyc[(i + 1) % cyc.size()];
      choices.push_back(edge_groups.at({a, b}));
    }
    std::vector<size_t> pick(choices.size(), 0);
    while (true) {
      Recurrence r;
      for (int idx : cyc) r.node_ids.push_back(dfg.nodes[idx].id);
      for (int idx : cyc) r.total_latency += node_latency(idx);
      for (size_t i = 0; i < pick.size(); ++i)
        r.total_distance += dfg.edges[choices[i][pick[i]]].distance;
      if (r.total_distance >= 1) out.push_back(std::move(r));
      // Advance the mixed-radix counter.
      size_t i = 0;
      for (; i < pick.size(); ++i) {
        if (++pick[i] < choices[i].size()) break;
        pick[i] = 0;
      }
      if (i == pick.size()) break;
    }
  }
  return out;
}

std::vector<Recurrence> enumerate_recurrences(const DFG& dfg) {
  return enumerate_recurrences(dfg, {});
}

int rec_mii(const DFG& dfg) {
  int best = 1;
  for (const auto& r : enumerate_recurrences(dfg)) {
    int ii = (r.total_latency + r.total_distance - 1) / r.total_distance;
    best = std::max(best, ii);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::string kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Data: return "data";
    case EdgeKind::Predicate: return "predicate";
    case EdgeKind::MemoryOrder: return "memory_order";
  }
  return "data";
}

EdgeKind kind_from_name(const std::string& s, const std::string& where) {
  if (s == "data") return EdgeKind::Data;
  if (s == "predicate") return EdgeKind::Predicate;
  if (s == "memory_order") return EdgeKind::MemoryOrder;
  throw ParseError(where + ": unknown edge kind \"" + s + "\"");
}

}  // namespace

json kernel_params_to_json(const KernelParams& p) {
  json j;
  j["kernel"] = p.kernel;
  j["variant"] = p.variant;
  j["clusters"] = p.clusters;
  if (p.kernel == "gemm") {
    j["ti"] = p.ti; j["tj"] = p.tj; j["tk"] = p.tk; j["unroll"] = p.unroll;
    j["m"] = p.m; j["n"] = p.n; j["kdim"] = p.kdim;
  } else {
    j["to1"] = p.to1; j["to2"] = p.to2; j["tco"] = p.tco; j["k"] = p.k;
    j["o1"] = p.o1; j["o2"] = p.o2; j["co"] = p.co;
  }
  return j;
}

KernelParams kernel_params_from_json(const json& j) {
  KernelParams p;
  p.kernel = require_string(j, "kernel", "dfg.metadata");
  p.variant = require_string(j, "variant", "dfg.metadata");
  p.clusters = get_int_or(j, "clusters", 4);
  p.ti = get_int_or(j, "ti", 0); p.tj = get_int_or(j, "tj", 0); p.tk = get_int_or(j, "tk", 0);
  p.unroll = get_int_or(j, "unroll", 4);
  p.m = get_int_or(j, "m", 0); p.n = get_int_or(j, "n", 0); p.kdim = get_int_or(j, "kdim", 0);
  p.to1 = get_int_or(j, "to1", 0); p.to2 = get_int_or(j, "to2", 0);
  p.tco = get_int_or(j, "tco", 0); p.k = get_int_or(j, "k", 0);
  p.o1 = get_int_or(j, "o1", 0); p.o2 = get_int_or(j, "o2", 0); p.co = get_int_or(j, "co", 0);
  return p;
}

std::string serialize_dfg(const DFG& dfg) {
  json root;
  root["dfg_version"] = 1;
  root["name"] = dfg.name;
  root["trip_count"] = dfg.trip_count;
  root["invocations"] = dfg.invocations;
  json live_ins = json::array();
  for (const auto& a : dfg.arrays_in)
    live_ins.push_back(json{{"array", a.name}, {"dims", a.dims}, {"elem_bytes", a.elem_bytes}});
  for (const auto& s : dfg.scalars) live_ins.push_back(json{{"scalar", s}});
  root["live_ins"] = live_ins;
  json live_outs = json::array();
  for (const auto& a : dfg.arrays_out)
    live_outs.push_back(json{{"array", a.name}, {"dims", a.dims}, {"elem_bytes", a.elem_bytes}});
  root["live_outs"] = live_outs;
  json nodes = json::array();
  for (const auto& n : dfg.nodes) {
    json jn{{"id", n.id}, {"op", n.opcode}};
    if (n.const_operand)
      jn["const"] = json{{"index", n.const_operand->index}, {"value", n.const_operand->value}};
    if (n.array_ref)
      jn["mem"] = json{{"array", n.array_ref->array}, {"index_expr", n.array_ref->index_expr}};
    if (!n.scalar.empty()) jn["scalar"] = n.scalar;
    nodes.push_back(jn);
  }
  root["nodes"] = nodes;
  json edges = json::array();
  for (const auto& e : dfg.edges) {
    json je{{"src", e.src}, {"dst", e.dst}, {"operand", e.operand_index},
            {"distance", e.distance}, {"kind", kind_name(e.kind)}};
    if (e.init) {
      je["init"] = e.init->is_scalar ? json{{"scalar", e.init->scalar}}
                                     : json{{"imm", e.init->imm}};
    }
    edges.push_back(je);
  }
  root["edges"] = edges;
  if (dfg.kernel) root["metadata"] = json{{"kernel", kernel_params_to_json(*dfg.kernel)}};
  return root.dump(2) + "\n";
}

DFG parse_dfg(const std::string& text) {
  json root = parse_json_text(text, "dfg");
  reject_unknown_keys(root, {"dfg_version", "name", "trip_count", "invocations", "live_ins",
                             "live_outs", "nodes", "edges", "metadata"},
                      "dfg");
  int version = require_int(root, "dfg_version", "dfg");
  if (version != 1) throw ParseError("dfg: unsupported dfg_version " + std::to_string(version));

  DFG dfg;
  dfg.name = root.contains("name") ? require_string(root, "name", "dfg") : "unnamed";
  dfg.trip_count = root.contains("trip_count") ? root["trip_count"].get<int64_t>() : 1;
  dfg.invocations = root.contains("invocations") ? root["invocations"].get<int64_t>() : 1;

  auto parse_live = [&](const json& arr, const std::string& where, bool outs) {
    for (size_t i = 0; i < arr.size(); ++i) {
      const json& item = arr[i];
      const std::string loc = where + "[" + std::to_string(i) + "]";
      if (item.contains("array")) {
        reject_unknown_keys(item, {"array", "dims", "elem_bytes"}, loc);
        ArrayDecl a;
        a.name = require_string(item, "array", loc);
        if (item.contains("dims")) a.dims = item["dims"].get<std::vector<int>>();
        a.elem_bytes = get_int_or(item, "elem_bytes", 2);
        (outs ? dfg.arrays_out : dfg.arrays_in).push_back(a);
      } else if (item.contains("scalar")) {
        reject_unknown_keys(item, {"scalar"}, loc);
        if (outs) throw ParseError(loc + ": scalar live-outs are not supported");
        dfg.scalars.push_back(require_string(item, "scalar", loc));
      } else {
        throw ParseError(loc + ": expected an \"array\" or \"scalar\" entry");
      }
    }
  };
  if (root.contains("live_ins")) parse_live(root["live_ins"], "dfg.live_ins", false);
  if (root.contains("live_outs")) parse_live(root["live_outs"], "dfg.live_outs", true);

  if (root.contains("nodes")) {
    for (size_t i = 0; i < root["nodes"].size(); ++i) {
      const json& jn = root["nodes"][i];
      const std::string loc = "dfg.nodes[" + std::to_string(i) + "]";
      reject_unknown_keys(jn, {"id", "op", "const", "mem", "scalar"}, loc);
      DFGNode n;
      n.id = require_int(jn, "id", loc);
      n.opcode = require_string(jn, "op", loc);
      if (jn.contains("const")) {
        ConstOperand c;
        c.index = require_int(jn["const"], "index", loc + ".const");
        c.value = jn["const"].at("value").get<int64_t>();
        n.const_operand = c;
      }
      if (jn.contains("mem")) {
        ArrayRef a;
        a.array = require_string(jn["mem"], "array", loc + ".mem");
        if (jn["mem"].contains("index_expr")) a.index_expr = jn["mem"]["index_expr"].get<std::string>();
        n.array_ref = a;
      }
      if (jn.contains("scalar")) n.scalar = jn["scalar"].get<std::string>();
      dfg.nodes.push_back(n);
    }
  }
  if (root.contains("edges")) {
    for (size_t i = 0; i < root["edges"].size(); ++i) {
      const json& je = root["edges"][i];
      const std::string loc = "dfg.edges[" + std::to_string(i) + "]";
      reject_unknown_keys(je, {"src", "dst", "operand", "distance", "kind", "init"}, loc);
      DFGEdge e;
      e.src = require_int(je, "src", loc);
      e.dst = require_int(je, "dst", loc);
      e.operand_index = get_int_or(je, "operand", 0);
      e.distance = get_int_or(je, "distance", 0);
      e.kind = je.contains("kind") ? kind_from_name(je["kind"].get<std::string>(), loc)
                                   : EdgeKind::Data;
      if (je.contains("init")) {
        CarriedInit init;
        if (je["init"].contains("scalar")) {
          init.is_scalar = true;
          init.scalar = je["init"]["scalar"].get<std::string>();
        } else {
          init.imm = je["init"].at("imm").get<int64_t>();
        }
        e.init = init;
      }
      dfg.edges.push_back(e);
    }
  }
  if (root.contains("metadata") && root["metadata"].contains("kernel"))
    dfg.kernel = kernel_params_from_json(root["metadata"]["kernel"]);

  auto diags = validate_dfg(dfg);
  if (has_errors(diags)) throw SemanticError("dfg: " + join_diagnostics(diags), diags);
  return dfg;
}

// ---------------------------------------------------------------------------
// Structured-conditional lowering
// ---------------------------------------------------------------------------

DFG lower_conditionals(const DFG& dfg) {
  bool any = false;
  for (const auto& n : dfg.nodes)
    if (n.opcode == "BR" || n.opcode == "PHI") { any = true; break; }
  if (!any) return dfg;

  std::map<int, const DFGNode*> by_id;
  for (const auto& n : dfg.nodes) by_id[n.id] = &n;

  // Single-level check: a BR predicate or PHI value may not come from
  // another BR/PHI.
  auto feeds = [&](int dst, int operand) -> const DFGEdge* {
    for (const auto& e : dfg.edges)
      if (e.kind != EdgeKind::MemoryOrder && e.dst == dst && e.operand_index == operand)
        return &e;
    return nullptr;
  };
  for (const auto& n : dfg.nodes) {
    if (n.opcode != "BR" && n.opcode != "PHI") continue;
    int arity = n.opcode == "BR" ? 1 : 3;
    for (int k = 0; k < arity; ++k) {
      const DFGEdge* e = feeds(n.id, k);
      if (!e) continue;
      const std::string& src_op = by_id.at(e->src)->opcode;
      if (src_op == "BR" || src_op == "PHI")
        throw SemanticError("lower_conditionals: nested or irreducible conditional at node " +
                            std::to_string(n.id));
    }
  }

  DFG out = dfg;
  out.nodes.clear();
  out.edges.clear();
  std::map<int, int> replaced;  // PHI id -> SEL id; BR id -> its predicate source

  // A PHI's predicate arrives on operand 2 from its BR; the BR's operand 0
  // carries the actual condition value.
  std::map<int, const DFGEdge*> br_pred;
  for (const auto& n : dfg.nodes)
    if (n.opcode == "BR") br_pred[n.id] = feeds(n.id, 0);

  for (const auto& n : dfg.nodes) {
    if (n.opcode == "BR") continue;
    if (n.opcode == "PHI") {
      DFGNode sel = n;
      sel.opcode = "SEL";
      out.nodes.push_back(sel);
      replaced[n.id] = n.id;
      continue;
    }
    out.nodes.push_back(n);
  }
  for (const auto& e : dfg.edges) {
    const std::string& dst_op = by_id.at(e.dst)->opcode;
    const std::string& src_op = by_id.at(e.src)->opcode;
    if (src_op == "BR") continue;  // replaced below
    if (dst_op == "BR") continue;
    if (dst_op == "PHI") {
      DFGEdge ne = e;
      // PHI(then, else, pred) -> SEL(pred, then, else)
      if (e.operand_index == 0) ne.operand_index = 1;
      else if (e.operand_index == 1) ne.operand_index = 2;
      else ne.operand_index = 0;
      out.edges.push_back(ne);
      continue;
    }
    out.edges.push_back(e);
  }
  // Wire each PHI's predicate slot from its BR's condition source.
  for (const auto& n : dfg.nodes) {
    if (n.opcode != "PHI") continue;
    const DFGEdge* pe = feeds(n.id, 2);
    if (!pe) throw SemanticError("lower_conditionals: PHI " + std::to_string(n.id) + " has no BR");
    const DFGNode* br = by_id.at(pe->src);
    if (br->opcode != "BR")
      throw SemanticError("lower_conditionals: PHI " + std::to_string(n.id) +
                          " predicate is not a BR");
    const DFGEdge* cond = br_pred.at(br->id);
    if (!cond) {
      // Condition is the BR's immediate.
      const DFGNode* brn = by_id.at(br->id);
      if (!brn->const_operand)
        throw SemanticError("lower_conditionals: BR " + std::to_string(br->id) + " has no condition");
      for (auto& on : out.nodes)
        if (on.id == n.id) on.const_operand = ConstOperand{0, brn->const_operand->value};
      continue;
    }
    DFGEdge ne = *cond;
    ne.dst = n.id;
    ne.operand_index = 0;
    ne.kind = EdgeKind::Predicate;
    out.edges.push_back(ne);
  }
  auto diags = validate_dfg(out);
  if (has_errors(diags))
    throw SemanticError("lower_conditionals: produced invalid graph: " + join_diagnostics(diags));
  return out;
}

// ---------------------------------------------------------------------------
// Interpreter
// ---------------------------------------------------------------------------

int64_t wrap_width(int64_t v, int data_width) {
  uint64_t mask = (data_width >= 64) ? ~0ULL : ((1ULL << data_width) - 1);
  uint64_t u = static_cast<uint64_t>(v) & mask;
  // Sign extend.
  uint64_t sign = 1ULL << (data_width - 1);
  if (u & sign) return static_cast<int64_t>(u | ~mask);
  return static_cast<int64_t>(u);
}

int64_t eval_op(const std::string& op, const std::vector<int64_t>& a, int w) {
  auto arg = [&](size_t i) { return i < a.size() ? a[i] : 0; };
  int64_t r = 0;
  if (op == "ADD") r = arg(0) + arg(1);
  else if (op == "SUB") r = arg(0) - arg(1);
  else if (op == "MUL") r = arg(0) * arg(1);
  else if (op == "SHL") r = arg(0) << (arg(1) & (w - 1));
  else if (op == "SHR") r = static_cast<int64_t>((static_cast<uint64_t>(arg(0)) &
                             ((w >= 64) ? ~0ULL : ((1ULL << w) - 1))) >> (arg(1) & (w - 1)));
  else if (op == "AND") r = arg(0) & arg(1);
  else if (op == "OR") r = arg(0) | arg(1);
  else if (op == "XOR") r = arg(0) ^ arg(1);
  else if (op == "CMP_EQ") r = arg(0) == arg(1);
  else if (op == "CMP_NE") r = arg(0) != arg(1);
  else if (op == "CMP_LT") r = arg(0) < arg(1);
  else if (op == "CMP_LE") r = arg(0) <= arg(1);
  else if (op == "CMP_GT") r = arg(0) > arg(1);
  else if (op == "CMP_GE") r = arg(0) >= arg(1);
  else if (op == "SEL") r = arg(0) != 0 ? arg(1) : arg(2);
  else if (op == "NOP") r = 0;
  else throw SemanticError("eval: unsupported opcode " + op);
  return wrap_width(r, w);
}

namespace {

int64_t load_elem(const std::vector<uint8_t>& bytes, int64_t offset, int elem_bytes, int w) {
  if (offset < 0 || offset + elem_bytes > static_cast<int64_t>(bytes.size()))
    throw SemanticError("interp: load offset " + std::to_string(offset) + " out of bounds");
  uint64_t v = 0;
  for (int i = 0; i < elem_bytes; ++i) v |= static_cast<uint64_t>(bytes[offset + i]) << (8 * i);
  return wrap_width(static_cast<int64_t>(v), w);
}

void store_elem(std::vector<uint8_t>& bytes, int64_t offset, int elem_bytes, int64_t value) {
  if (offset < 0 || offset + elem_bytes > static_cast<int64_t>(bytes.size()))
    throw SemanticError("interp: store offset " + std::to_string(offset) + " out of bounds");
  uint64_t v = static_cast<uint64_t>(value);
  for (int i = 0; i < elem_bytes; ++i) bytes[offset + i] = static_cast<uint8_t>((v >> (8 * i)) & 0xFF);
}

}  // namespace

void run_dfg(const DFG& dfg, InterpState& state, int64_t trip_count, int data_width) {
  auto order = topo_order_distance0(dfg);
  std::map<int, int> index_of;
  for (size_t i = 0; i < dfg.nodes.size(); ++i) index_of[dfg.nodes[i].id] = static_cast<int>(i);

  // Operand feed table: per node index, per operand slot.
  struct Feed {
    enum { kEdge, kImm, kNone } kind = kNone;
    int src_index = -1;
    int distance = 0;
    CarriedInit init;
    int64_t imm = 0;
  };
  std::vector<std::vector<Feed>> feeds(dfg.nodes.size());
  for (size_t i = 0; i < dfg.nodes.size(); ++i)
    feeds[i].resize(opcode_arity(dfg.nodes[i].opcode));
  for (const auto& n : dfg.nodes) {
    if (!n.const_operand) continue;
    auto& f = feeds[index_of[n.id]][n.const_operand->index];
    f.kind = Feed::kImm;
    f.imm = n.const_operand->value;
  }
  for (const auto& e : dfg.edges) {
    if (e.kind == EdgeKind::MemoryOrder) continue;
    auto& f = feeds[index_of[e.dst]][e.operand_index];
    f.kind = Feed::kEdge;
    f.src_index = index_of[e.src];
    f.distance = e.distance;
    if (e.init) f.init = *e.init;
  }

  // Value history ring buffers keyed by producer, deep enough for the
  // largest carried distance.
  int max_dist = 1;
  for (const auto& e : dfg.edges) max_dist = std::max(max_dist, e.distance + 1);
  std::vector<std::vector<int64_t>> history(dfg.nodes.size(),
                                            std::vector<int64_t>(max_dist, 0));

  auto scalar_value = [&](const std::string& name) -> int64_t {
    auto it = state.scalars.find(name);
    return it == state.scalars.end() ? 0 : it->second;
  };

  for (int64_t iter = 0; iter < trip_count; ++iter) {
    int slot = static_cast<int>(iter % max_dist);
    for (int idx : order) {
      const DFGNode& n = dfg.nodes[idx];
      if (n.opcode == "CONST") {
        history[idx][slot] = wrap_width(n.const_operand->value, data_width);
        continue;
      }
      if (n.opcode == "LIVE_IN") {
        history[idx][slot] = wrap_width(scalar_value(n.scalar), data_width);
        continue;
      }
      std::vector<int64_t> args(feeds[idx].size(), 0);
      for (size_t k = 0; k < feeds[idx].size(); ++k) {
        const Feed& f = feeds[idx][k];
        if (f.kind == Feed::kImm) {
          args[k] = wrap_width(f.imm, data_width);
        } else if (f.kind == Feed::kEdge) {
          if (iter < f.distance) {
            args[k] = wrap_width(
                f.init.is_scalar ? scalar_value(f.init.scalar) : f.init.imm, data_width);
          } else {
            int src_slot = static_cast<int>((iter - f.distance) % max_dist);
            args[k] = history[f.src_index][src_slot];
          }
        }
      }
      if (n.opcode == "LOAD") {
        auto& bytes = state.arrays.at(n.array_ref->array);
        const ArrayDecl* decl = dfg.array_decl(n.array_ref->array);
        int eb = decl ? decl->elem_bytes : 2;
        uint64_t mask = (data_width >= 64) ? ~0ULL : ((1ULL << data_width) - 1);
        history[idx][slot] = load_elem(bytes, static_cast<int64_t>(
                                        static_cast<uint64_t>(args[0]) & mask), eb, data_width);
      } else if (n.opcode == "STORE") {
        auto& bytes = state.arrays.at(n.array_ref->array);
        const ArrayDecl* decl = dfg.array_decl(n.array_ref->array);
        int eb = decl ? decl->elem_bytes : 2;
        uint64_t mask = (data_width >= 64) ? ~0ULL : ((1ULL << data_width) - 1);
        store_elem(bytes, static_cast<int64_t>(static_cast<uint64_t>(args[0]) & mask), eb, args[1]);
        history[idx][slot] = args[1];
      } else {
        history[idx][slot] = eval_op(n.opcode, args, data_width);
      }
    }
  }
}

}  // namespace cgrakit
