// Placement and routing onto the modulo routing resource graph.
//
// The mapper searches II upward from MII. Each II attempt runs simulated
// annealing over placements with negotiated-congestion routing underneath:
// every data edge is routed as a chain of storage slots (port registers and
// register-file entries) at consecutive absolute cycles, sharing is free
// within one produced value at one absolute time, and oversubscribed slots
// get escalating history penalties. Very small instances fall back to an
// exhaustive placement + routing search so that feasibility matches a
// brute-force enumeration.

#include "cgrakit/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <random>

namespace cgrakit {

FoldedDFG fold_dfg(const DFG& dfg) {
  FoldedDFG f;
  std::map<int, const DFGNode*> by_id;
  for (const auto& n : dfg.nodes) by_id[n.id] = &n;
  for (const auto& n : dfg.nodes) {
    if (n.opcode == "BR" || n.opcode == "PHI")
      throw SemanticError("mapper: structured conditionals must be lowered first (node " +
                          std::to_string(n.id) + ")");
    if (is_pseudo_op(n.opcode)) continue;
    f.placeable.push_back(n.id);
    f.feeds[n.id].resize(opcode_arity(n.opcode));
    if (n.const_operand) {
      auto& feed = f.feeds[n.id][n.const_operand->index];
      feed.kind = OperandFeed::Imm;
      feed.imm = n.const_operand->value;
    }
  }
  for (size_t e = 0; e < dfg.edges.size(); ++e) {
    const DFGEdge& edge = dfg.edges[e];
    if (edge.kind == EdgeKind::MemoryOrder) continue;
    const DFGNode* src = by_id.at(edge.src);
    const DFGNode* dst = by_id.at(edge.dst);
    if (is_pseudo_op(dst->opcode)) continue;
    auto& feed = f.feeds[dst->id][edge.operand_index];
    if (src->opcode == "CONST") {
      feed.kind = OperandFeed::Imm;
      feed.imm = src->const_operand->value;
    } else if (src->opcode == "LIVE_IN") {
      feed.kind = OperandFeed::Scalar;
      feed.scalar = src->scalar;
    } else {
      feed.kind = OperandFeed::Route;
      feed.edge_index = static_cast<int>(e);
      feed.src_id = src->id;
      feed.distance = edge.distance;
      if (edge.init) {
        feed.has_init = true;
        feed.init = *edge.init;
      } else if (edge.distance > 0) {
        feed.has_init = true;
        feed.init = CarriedInit{};
      }
      f.routed_edges.push_back(static_cast<int>(e));
      f.nets[src->id].push_back(static_cast<int>(e));
    }
  }
  return f;
}

double utilization(const Mapping& m, const DFG& dfg, const ArchSpec& spec) {
  return static_cast<double>(dfg.fu_node_count()) /
         (static_cast<double>(m.ii) * spec.pe_count());
}

double utilization_percent(int fu_nodes, int ii, int pes) {
  return 100.0 * fu_nodes / (static_cast<double>(ii) * pes);
}

// ---------------------------------------------------------------------------
// verify_mapping
// ---------------------------------------------------------------------------

std::vector<Diagnostic> verify_mapping(const Mapping& m, const DFG& dfg, const ArchSpec& spec,
                                       const ResourceGraph& rg, const DataLayout& layout) {
  std::vector<Diagnostic> out;
  const int ii = m.ii;
  FoldedDFG folded;
  try {
    folded = fold_dfg(dfg);
  } catch (const SemanticError& e) {
    out.push_back({Severity::Error, "dfg", e.what()});
    return out;
  }
  std::map<int, const DFGNode*> by_id;
  for (const auto& n : dfg.nodes) by_id[n.id] = &n;

  auto lat_of = [&](int id) {
    auto it = m.placements.find(id);
    const DFGNode* n = by_id.at(id);
    if (it == m.placements.end()) return default_latency(n->opcode);
    return spec.pe_at(it->second.pe).latency(n->opcode);
  };

  std::map<std::pair<int, int>, int> fu_busy;
  for (int id : folded.placeable) {
    auto it = m.placements.find(id);
    const std::string where = "node " + std::to_string(id);
    if (it == m.placements.end()) {
      out.push_back({Severity::Error, where, "not placed"});
      continue;
    }
    const Placement& pl = it->second;
    if (!spec.in_grid(pl.pe)) {
      out.push_back({Severity::Error, where, "placed outside the grid"});
      continue;
    }
    const PESpec& pe = spec.pe_at(pl.pe);
    const DFGNode* n = by_id.at(id);
    if (!pe.supports(n->opcode))
      out.push_back({Severity::Error, where, "PE does not support " + n->opcode});
    if (pl.t < 0) out.push_back({Severity::Error, where, "negative start time"});
    int lat = pe.latency(n->opcode);
    for (int s = 0; s < lat; ++s) {
      auto key = std::make_pair(pl.pe.row * spec.cols + pl.pe.col, (pl.t + s) % ii);
      auto [pos, fresh] = fu_busy.emplace(key, id);
      if (!fresh && pos->second != id)
        out.push_back({Severity::Error, where,
                       "FU slot conflict with node " + std::to_string(pos->second)});
    }
  }

  std::map<std::tuple<int, int, int>, int> port_busy;
  for (int id : folded.placeable) {
    const DFGNode* n = by_id.at(id);
    if (!is_memory_op(n->opcode)) continue;
    auto pit = m.placements.find(id);
    if (pit == m.placements.end()) continue;
    const std::string where = "node " + std::to_string(id);
    int bank = layout.bank_of(n->array_ref->array);
    const BankSpec* bs = spec.bank_by_id(bank);
    if (!bs) {
      out.push_back({Severity::Error, where, "array is not placed in any bank"});
      continue;
    }
    auto bpit = m.bank_port.find(id);
    if (bpit == m.bank_port.end()) {
      out.push_back({Severity::Error, where, "memory op has no bank port"});
      continue;
    }
    if (bpit->second < 0 || bpit->second >= bs->ports_per_cycle) {
      out.push_back({Severity::Error, where, "bank port index out of range"});
      continue;
    }
    auto key = std::make_tuple(bank, bpit->second, pit->second.t % ii);
    auto [pos, fresh] = port_busy.emplace(key, id);
    if (!fresh)
      out.push_back({Severity::Error, where,
                     "bank port conflict with node " + std::to_string(pos->second)});
  }

  std::set<std::pair<int, int>> storage_edge;
  for (const auto& e : rg.edges) {
    auto sk = rg.nodes[e.src].kind;
    auto dk = rg.nodes[e.dst].kind;
    bool s_ok = sk == ResKind::Port || sk == ResKind::Reg;
    bool d_ok = dk == ResKind::Port || dk == ResKind::Reg;
    if (e.delay == 1 && s_ok && d_ok) storage_edge.insert({e.src, e.dst});
  }

  std::map<std::pair<int, int>, std::pair<int, int>> claims;  // (res, tau) -> (net, abs_t)
  auto claim = [&](int res, int abs_t, int net, const std::string& where) {
    auto key = std::make_pair(res, abs_t % ii);
    auto it = claims.find(key);
    if (it == claims.end()) {
      claims[key] = {net, abs_t};
    } else if (it->second != std::make_pair(net, abs_t)) {
      out.push_back({Severity::Error, where,
                     "routing resource " + rg.nodes[res].label + "@t" +
                         std::to_string(abs_t % ii) + " carries two distinct values"});
    }
  };

  for (int e_idx : folded.routed_edges) {
    const DFGEdge& edge = dfg.edges[e_idx];
    const std::string where = "edge " + std::to_string(e_idx);
    auto su = m.placements.find(edge.src);
    auto sv = m.placements.find(edge.dst);
    if (su == m.placements.end() || sv == m.placements.end()) continue;
    int exit_t = su->second.t + lat_of(edge.src) - 1;
    int arrival = sv->second.t + edge.distance * ii;
    auto rit = m.routes.find(e_idx);
    if (rit == m.routes.end()) {
      out.push_back({Severity::Error, where, "no route"});
      continue;
    }
    const Route& r = rit->second;
    if (r.arrival != arrival)
      out.push_back({Severity::Error, where,
                     "arrival " + std::to_string(r.arrival) +
                         " != consumer start + distance*II (" + std::to_string(arrival) + ")"});
    if (r.steps.empty()) {
      if (!(su->second.pe == sv->second.pe && arrival == exit_t + 1))
        out.push_back({Severity::Error, where,
                       "empty route is only legal for a same-PE bypass one cycle after exit"});
      continue;
    }
    if (r.steps.front().abs_time != exit_t + 1)
      out.push_back({Severity::Error, where, "route does not leave at producer exit + 1"});
    if (r.steps.back().abs_time != arrival)
      out.push_back({Severity::Error, where, "route does not end at the consumer read cycle"});
    bool shape_ok = true;
    for (size_t s = 0; s < r.steps.size() && shape_ok; ++s) {
      const RouteStep& st = r.steps[s];
      if (st.resource < 0 || st.resource >= static_cast<int>(rg.nodes.size())) {
        out.push_back({Severity::Error, where, "route names a nonexistent resource"});
        shape_ok = false;
        break;
      }
      const ResourceNode& rn = rg.nodes[st.resource];
      if (rn.kind != ResKind::Port && rn.kind != ResKind::Reg) {
        out.push_back({Severity::Error, where, "route traverses a non-storage resource"});
        shape_ok = false;
        break;
      }
      if (s > 0) {
        if (st.abs_time != r.steps[s - 1].abs_time + 1) {
          out.push_back({Severity::Error, where, "route times are not consecutive"});
          shape_ok = false;
          break;
        }
        if (!storage_edge.count({r.steps[s - 1].resource, st.resource})) {
          out.push_back({Severity::Error, where,
                         "route jumps between unconnected resources (" +
                             rg.nodes[r.steps[s - 1].resource].label + " -> " + rn.label + ")"});
          shape_ok = false;
          break;
        }
      }
      claim(st.resource, st.abs_time, edge.src, where);
    }
    if (!shape_ok) continue;
    if (!(rg.nodes[r.steps.front().resource].pe == su->second.pe))
      out.push_back({Severity::Error, where, "route does not start at the producer PE"});
    if (!(rg.nodes[r.steps.back().resource].pe == sv->second.pe))
      out.push_back({Severity::Error, where, "route does not end at the consumer PE"});
  }

  for (size_t e = 0; e < dfg.edges.size(); ++e) {
    const DFGEdge& edge = dfg.edges[e];
    if (edge.kind != EdgeKind::MemoryOrder) continue;
    auto su = m.placements.find(edge.src);
    auto sv = m.placements.find(edge.dst);
    if (su == m.placements.end() || sv == m.placements.end()) continue;
    if (sv->second.t + edge.distance * ii < su->second.t + lat_of(edge.src))
      out.push_back({Severity::Error, "edge " + std::to_string(e),
                     "memory-order timing violated"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

namespace {

constexpr double kOveruseWeight = 24.0;
constexpr double kFailWeight = 900.0;
constexpr double kWirelenWeight = 0.02;

struct Engine {
  const DFG& dfg;
  const ArchSpec& spec;
  const ResourceGraph& rg;
  const DataLayout& layout;
  const int ii;
  const MapperParams& params;
  FoldedDFG folded;
  std::mt19937_64 rng;

  std::map<int, const DFGNode*> by_id;
  std::map<int, std::vector<PECoord>> candidates;
  std::map<int, int> asap;
  std::vector<int> order;  // placeable ids in (asap, id) order
  int horizon = 8;

  std::vector<std::vector<int>> storage_succ;     // resource -> storage successors
  std::map<int, std::vector<int>> local_storage;  // pe_lin -> resources (ports+regs)
  std::vector<int> mem_order_edges;

  // dynamic state
  std::map<int, Placement> place;
  std::map<std::pair<int, int>, int> fu_busy;
  std::map<std::tuple<int, int, int>, int> bank_busy;  // (bank, port, tau) -> node
  std::map<int, int> bank_port_of;

  struct Owner {
    int net;
    int abs_t;
    int count;
  };
  std::vector<std::vector<Owner>> usage;
  std::vector<double> history;
  double present_factor = 0.6;
  std::map<int, Route> routes;
  std::set<int> failed_edges;
  int overuse_total = 0;
  long long wirelen = 0;

  Engine(const DFG& d, const ArchSpec& s, const ResourceGraph& r, const DataLayout& l, int ii_,
         const MapperParams& p)
      : dfg(d), spec(s), rg(r), layout(l), ii(ii_), params(p), rng(p.seed * 0x9E3779B97F4A7C15ULL + ii_) {
    folded = fold_dfg(dfg);
    for (const auto& n : dfg.nodes) by_id[n.id] = &n;
    build_static();
  }

  int pe_lin(PECoord c) const { return c.row * spec.cols + c.col; }

  int lat_at(int id, PECoord pe) const { return spec.pe_at(pe).latency(by_id.at(id)->opcode); }
  int lat_placed(int id) const { return lat_at(id, place.at(id).pe); }

  void build_static() {
    // Candidates: opcode support plus bank affinity for memory ops.
    for (int id : folded.placeable) {
      const DFGNode* n = by_id.at(id);
      std::vector<PECoord> cands;
      for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
          PECoord pe{r, c};
          const PESpec& ps = spec.pe_at(pe);
          if (!ps.supports(n->opcode)) continue;
          if (is_memory_op(n->opcode)) {
            int bank = layout.bank_of(n->array_ref->array);
            if (std::find(ps.mem_access.begin(), ps.mem_access.end(), bank) ==
                ps.mem_access.end())
              continue;
          }
          cands.push_back(pe);
        }
      }
      candidates[id] = std::move(cands);
    }

    // ASAP levels over distance-0 routed edges.
    for (int id : folded.placeable) asap[id] = 0;
    auto topo = topo_order_distance0(dfg);
    for (int idx : topo) {
      const DFGNode& n = dfg.nodes[idx];
      if (is_pseudo_op(n.opcode)) continue;
      for (const auto& feed : folded.feeds[n.id]) {
        if (feed.kind != OperandFeed::Route || feed.distance != 0) continue;
        int lat = spec.pe_defaults.latency(by_id.at(feed.src_id)->opcode);
        asap[n.id] = std::max(asap[n.id], asap[feed.src_id] + lat);
      }
    }
    int depth_est = 0;
    for (int id : folded.placeable)
      depth_est = std::max(depth_est, asap[id] + spec.pe_defaults.latency(by_id.at(id)->opcode));
    horizon = std::max(2 * ii, depth_est + 2 * ii);

    order = folded.placeable;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (asap[a] != asap[b]) return asap[a] < asap[b];
      return a < b;
    });

    storage_succ.resize(rg.nodes.size());
    for (const auto& e : rg.edges) {
      auto sk = rg.nodes[e.src].kind;
      auto dk = rg.nodes[e.dst].kind;
      bool s_ok = sk == ResKind::Port || sk == ResKind::Reg;
      bool d_ok = dk == ResKind::Port || dk == ResKind::Reg;
      if (e.delay == 1 && s_ok && d_ok) storage_succ[e.src].push_back(e.dst);
    }
    for (size_t i = 0; i < rg.nodes.size(); ++i) {
      const auto& n = rg.nodes[i];
      if (n.kind == ResKind::Port || n.kind == ResKind::Reg)
        local_storage[pe_lin(n.pe)].push_back(static_cast<int>(i));
    }
    for (size_t e = 0; e < dfg.edges.size(); ++e)
      if (dfg.edges[e].kind == EdgeKind::MemoryOrder)
        mem_order_edges.push_back(static_cast<int>(e));

    usage.assign(rg.nodes.size() * ii, {});
    history.assign(rg.nodes.size() * ii, 0.0);
  }

  // ---- claims ------------------------------------------------------------

  int slot_of(int resource, int abs_t) const { return resource * ii + (abs_t % ii); }

  void add_claim(int resource, int abs_t, int net) {
    auto& owners = usage[slot_of(resource, abs_t)];
    for (auto& o : owners) {
      if (o.net == net && o.abs_t == abs_t) {
        o.count++;
        return;
      }
    }
    owners.push_back({net, abs_t, 1});
    if (owners.size() > 1) overuse_total++;
  }

  void remove_claim(int resource, int abs_t, int net) {
    auto& owners = usage[slot_of(resource, abs_t)];
    for (size_t i = 0; i < owners.size(); ++i) {
      if (owners[i].net == net && owners[i].abs_t == abs_t) {
        if (--owners[i].count == 0) {
          bool was_overused = owners.size() >= 2;
          owners.erase(owners.begin() + i);
          if (was_overused) overuse_total--;
        }
        return;
      }
    }
  }

  double step_cost(int resource, int abs_t, int net) const {
    const auto& owners = usage[resource * ii + (abs_t % ii)];
    int present = 0;
    for (const auto& o : owners) {
      if (o.net == net && o.abs_t == abs_t) return 0.0;
      present++;
    }
    return (1.0 + history[resource * ii + (abs_t % ii)]) * (1.0 + present_factor * present);
  }

  // ---- routing -----------------------------------------------------------

  std::optional<Route> route_edge(int e_idx, bool exclusive) {
    const DFGEdge& edge = dfg.edges[e_idx];
    const Placement& pu = place.at(edge.src);
    const Placement& pv = place.at(edge.dst);
    int exit_t = pu.t + lat_placed(edge.src) - 1;
    int arrival = pv.t + edge.distance * ii;
    if (arrival < exit_t + 1) return std::nullopt;
    Route r;
    r.arrival = arrival;
    if (arrival == exit_t + 1 && pu.pe == pv.pe) return r;  // fu_out bypass

    struct State {
      double cost;
      int abs_t;
      int resource;
    };
    auto cmp = [](const State& a, const State& b) {
      if (a.cost != b.cost) return a.cost > b.cost;
      if (a.abs_t != b.abs_t) return a.abs_t > b.abs_t;
      return a.resource > b.resource;
    };
    std::priority_queue<State, std::vector<State>, decltype(cmp)> pq(cmp);
    // dist/parent keyed by (resource, abs_t - (exit_t+1))
    int span = arrival - exit_t;
    std::vector<std::vector<double>> dist(rg.nodes.size(),
                                          std::vector<double>(span, 1e18));
    std::vector<std::vector<int>> parent(rg.nodes.size(), std::vector<int>(span, -1));
    auto owned_or_free = [&](int res, int abs_t) {
      if (!exclusive) return true;
      const auto& owners = usage[slot_of(res, abs_t)];
      for (const auto& o : owners)
        if (!(o.net == edge.src && o.abs_t == abs_t)) return false;
      return true;
    };
    for (int s : local_storage[pe_lin(pu.pe)]) {
      if (!owned_or_free(s, exit_t + 1)) continue;
      double c = step_cost(s, exit_t + 1, edge.src);
      if (c < dist[s][0]) {
        dist[s][0] = c;
        pq.push({c, exit_t + 1, s});
      }
    }
    int goal = -1;
    while (!pq.empty()) {
      State st = pq.top();
      pq.pop();
      int k = st.abs_t - (exit_t + 1);
      if (st.cost > dist[st.resource][k]) continue;
      if (st.abs_t == arrival) {
        if (rg.nodes[st.resource].pe == pv.pe) {
          goal = st.resource;
          break;
        }
        continue;
      }
      for (int nxt : storage_succ[st.resource]) {
        if (!owned_or_free(nxt, st.abs_t + 1)) continue;
        double c = st.cost + step_cost(nxt, st.abs_t + 1, edge.src);
        int nk = k + 1;
        if (c < dist[nxt][nk]) {
          dist[nxt][nk] = c;
          parent[nxt][nk] = st.resource;
          pq.push({c, st.abs_t + 1, nxt});
        }
      }
    }
    if (goal < 0) return std::nullopt;
    std::vector<RouteStep> rev;
    int res = goal;
    for (int k = span - 1; k >= 0; --k) {
      rev.push_back({res, exit_t + 1 + k});
      res = parent[res][k];
    }
    std::reverse(rev.begin(), rev.end());
    r.steps = std::move(rev);
    // A route may not claim the same modulo slot twice (the value would
    // collide with its own next-iteration instance).
    std::set<std::pair<int, int>> seen;
    for (const auto& s : r.steps)
      if (!seen.insert({s.resource, s.abs_time % ii}).second) return std::nullopt;
    return r;
  }

  void apply_route(int e_idx, const Route& r) {
    routes[e_idx] = r;
    failed_edges.erase(e_idx);
    for (const auto& s : r.steps) add_claim(s.resource, s.abs_time, dfg.edges[e_idx].src);
    wirelen += static_cast<long long>(r.steps.size());
  }

  void rip_edge(int e_idx) {
    auto it = routes.find(e_idx);
    if (it != routes.end()) {
      for (const auto& s : it->second.steps)
        remove_claim(s.resource, s.abs_time, dfg.edges[e_idx].src);
      wirelen -= static_cast<long long>(it->second.steps.size());
      routes.erase(it);
    }
    failed_edges.erase(e_idx);
  }

  void route_one(int e_idx) {
    auto r = route_edge(e_idx, false);
    if (r) apply_route(e_idx, *r);
    else failed_edges.insert(e_idx);
  }

  void route_all() {
    for (int e : folded.routed_edges) rip_edge(e);
    for (const auto& [net, edges] : folded.nets)
      for (int e : edges) route_one(e);
  }

  // ---- cost --------------------------------------------------------------

  int mem_order_violations() const {
    int v = 0;
    for (int e : mem_order_edges) {
      const DFGEdge& edge = dfg.edges[e];
      auto su = place.find(edge.src);
      auto sv = place.find(edge.dst);
      if (su == place.end() || sv == place.end()) continue;
      if (sv->second.t + edge.distance * ii < su->second.t + lat_placed(edge.src)) v++;
    }
    return v;
  }

  double cost() const {
    return kOveruseWeight * overuse_total +
           kFailWeight * (static_cast<double>(failed_edges.size()) + mem_order_violations()) +
           kWirelenWeight * static_cast<double>(wirelen);
  }

  bool clean() const {
    return overuse_total == 0 && failed_edges.empty() && mem_order_violations() == 0;
  }

  // ---- placement ---------------------------------------------------------

  bool fu_span_free(int id, PECoord pe, int t) const {
    int lat = lat_at(id, pe);
    if (t < 0 || t + lat > horizon) return false;
    for (int s = 0; s < lat; ++s) {
      auto it = fu_busy.find({pe_lin(pe), (t + s) % ii});
      if (it != fu_busy.end() && it->second != id) return false;
    }
    return true;
  }

  int free_bank_port(int id, int t) const {
    const DFGNode* n = by_id.at(id);
    if (!is_memory_op(n->opcode)) return 0;
    int bank = layout.bank_of(n->array_ref->array);
    const BankSpec* bs = spec.bank_by_id(bank);
    if (!bs) return -1;
    for (int p = 0; p < bs->ports_per_cycle; ++p) {
      auto it = bank_busy.find({bank, p, t % ii});
      if (it == bank_busy.end() || it->second == id) return p;
    }
    return -1;
  }

  void claim_fu(int id, PECoord pe, int t) {
    int lat = lat_at(id, pe);
    for (int s = 0; s < lat; ++s) fu_busy[{pe_lin(pe), (t + s) % ii}] = id;
    const DFGNode* n = by_id.at(id);
    if (is_memory_op(n->opcode)) {
      int bank = layout.bank_of(n->array_ref->array);
      int port = free_bank_port(id, t);
      bank_busy[{bank, port, t % ii}] = id;
      bank_port_of[id] = port;
    }
    place[id] = Placement{pe, t};
  }

  void release_fu(int id) {
    auto it = place.find(id);
    if (it == place.end()) return;
    int lat = lat_placed(id);
    for (int s = 0; s < lat; ++s) {
      auto key = std::make_pair(pe_lin(it->second.pe), (it->second.t + s) % ii);
      auto fit = fu_busy.find(key);
      if (fit != fu_busy.end() && fit->second == id) fu_busy.erase(fit);
    }
    const DFGNode* n = by_id.at(id);
    if (is_memory_op(n->opcode)) {
      auto pit = bank_port_of.find(id);
      if (pit != bank_port_of.end()) {
        int bank = layout.bank_of(n->array_ref->array);
        auto key = std::make_tuple(bank, pit->second, it->second.t % ii);
        auto bit = bank_busy.find(key);
        if (bit != bank_busy.end() && bit->second == id) bank_busy.erase(bit);
        bank_port_of.erase(pit);
      }
    }
    place.erase(it);
  }

  static int manhattan(PECoord a, PECoord b) {
    return std::abs(a.row - b.row) + std::abs(a.col - b.col);
  }

  void initial_placement() {
    for (int id : order) {
      const auto& cands = candidates.at(id);
      PECoord best_pe{};
      int best_t = -1;
      long long best_score = 0;
      for (const PECoord& pe : cands) {
        int t_lo = 0;
        long long dist_sum = 0;
        for (const auto& feed : folded.feeds[id]) {
          if (feed.kind != OperandFeed::Route) continue;
          auto pit = place.find(feed.src_id);
          if (pit == place.end()) continue;
          dist_sum += manhattan(pit->second.pe, pe);
          if (feed.distance == 0)
            t_lo = std::max(t_lo, pit->second.t + lat_placed(feed.src_id) +
                                      manhattan(pit->second.pe, pe));
        }
        for (int e : mem_order_edges) {
          const DFGEdge& edge = dfg.edges[e];
          if (edge.dst != id || edge.distance != 0) continue;
          auto pit = place.find(edge.src);
          if (pit != place.end())
            t_lo = std::max(t_lo, pit->second.t + lat_placed(edge.src));
        }
        for (int t = t_lo; t < std::min(horizon, t_lo + 2 * ii); ++t) {
          if (!fu_span_free(id, pe, t)) continue;
          if (free_bank_port(id, t) < 0) continue;
          long long score = static_cast<long long>(t) * 1000 + dist_sum * 10 +
                            pe.row * spec.cols + pe.col;
          if (best_t < 0 || score < best_score) {
            best_score = score;
            best_pe = pe;
            best_t = t;
          }
          break;  // first free t for this PE is the best for this PE
        }
      }
      if (best_t < 0) {
        // Fall back to any free slot.
        for (const PECoord& pe : cands) {
          for (int t = 0; t < horizon && best_t < 0; ++t) {
            if (fu_span_free(id, pe, t) && free_bank_port(id, t) >= 0) {
              best_pe = pe;
              best_t = t;
            }
          }
          if (best_t >= 0) break;
        }
      }
      if (best_t < 0) {
        // Leave unplaced; the engine reports infeasibility later.
        continue;
      }
      claim_fu(id, best_pe, best_t);
    }
  }

  // Edges that touch a node.
  std::vector<int> incident_edges(int id) const {
    std::vector<int> out;
    for (int e : folded.routed_edges) {
      const DFGEdge& edge = dfg.edges[e];
      if (edge.src == id || edge.dst == id) out.push_back(e);
    }
    return out;
  }

  std::vector<int> problem_nodes() const {
    std::set<int> s;
    for (int e : failed_edges) {
      s.insert(dfg.edges[e].src);
      s.insert(dfg.edges[e].dst);
    }
    for (size_t slot = 0; slot < usage.size(); ++slot) {
      if (usage[slot].size() <= 1) continue;
      for (const auto& o : usage[slot]) s.insert(o.net);
    }
    for (int e : mem_order_edges) {
      const DFGEdge& edge = dfg.edges[e];
      auto su = place.find(edge.src);
      auto sv = place.find(edge.dst);
      if (su == place.end() || sv == place.end()) continue;
      if (sv->second.t + edge.distance * ii < su->second.t + lat_placed(edge.src)) {
        s.insert(edge.src);
        s.insert(edge.dst);
      }
    }
    return {s.begin(), s.end()};
  }

  bool anneal(int iters) {
    route_all();
    if (clean()) return true;
    double temp = params.initial_temp;
    int round_len = std::max(40, iters / std::max(1, params.max_rounds));
    double cur = cost();
    for (int it = 0; it < iters; ++it) {
      if (clean()) return true;
      if (it % round_len == round_len - 1) {
        // Negotiation round: escalate congestion pressure and reroute.
        for (size_t slot = 0; slot < usage.size(); ++slot)
          if (usage[slot].size() > 1)
            history[slot] += (usage[slot].size() - 1) * (params.congestion_growth - 1.0) * 2.0;
        present_factor *= params.congestion_growth;
        route_all();
        temp *= params.cooling;
        cur = cost();
        if (clean()) return true;
        continue;
      }

      // Pick a node, mostly from the trouble set.
      auto problems = problem_nodes();
      int id;
      if (!problems.empty() && (rng() % 100) < 80) {
        id = problems[rng() % problems.size()];
      } else {
        id = folded.placeable[rng() % folded.placeable.size()];
      }
      if (!place.count(id)) {
        // Try to place it anywhere legal.
        const auto& cands = candidates.at(id);
        if (cands.empty()) continue;
        PECoord pe = cands[rng() % cands.size()];
        int t = static_cast<int>(rng() % static_cast<uint64_t>(horizon));
        if (!fu_span_free(id, pe, t) || free_bank_port(id, t) < 0) continue;
        claim_fu(id, pe, t);
        for (int e : incident_edges(id))
          if (place.count(dfg.edges[e].src) && place.count(dfg.edges[e].dst)) route_one(e);
        cur = cost();
        continue;
      }

      const auto& cands = candidates.at(id);
      if (cands.empty()) continue;
      PECoord new_pe = cands[rng() % cands.size()];
      int new_t = static_cast<int>(rng() % static_cast<uint64_t>(horizon));

      Placement old = place.at(id);
      if (new_pe == old.pe && new_t == old.t) continue;

      auto touched = incident_edges(id);
      std::map<int, Route> saved;
      std::set<int> saved_failed;
      for (int e : touched) {
        auto rit = routes.find(e);
        if (rit != routes.end()) saved[e] = rit->second;
        if (failed_edges.count(e)) saved_failed.insert(e);
        rip_edge(e);
      }
      release_fu(id);
      if (!fu_span_free(id, new_pe, new_t) || free_bank_port(id, new_t) < 0) {
        claim_fu(id, old.pe, old.t);
        for (auto& [e, r] : saved) apply_route(e, r);
        for (int e : saved_failed) failed_edges.insert(e);
        continue;
      }
      claim_fu(id, new_pe, new_t);
      for (int e : touched)
        if (place.count(dfg.edges[e].src) && place.count(dfg.edges[e].dst)) route_one(e);

      double nxt = cost();
      double delta = nxt - cur;
      bool accept = delta <= 0;
      if (!accept && temp > 1e-6) {
        double u = static_cast<double>(rng() % 1000000) / 1000000.0;
        accept = u < std::exp(-delta / temp);
      }
      if (accept) {
        cur = nxt;
      } else {
        for (int e : touched) rip_edge(e);
        release_fu(id);
        claim_fu(id, old.pe, old.t);
        for (auto& [e, r] : saved) apply_route(e, r);
        for (int e : saved_failed) failed_edges.insert(e);
        cur = cost();
      }
    }
    route_all();
    return clean();
  }

  // ---- exhaustive search for tiny instances -------------------------------

  bool tiny_applicable() const {
    int max_dist = 0;
    for (const auto& e : dfg.edges) max_dist = std::max(max_dist, e.distance);
    return folded.placeable.size() <= 5 && spec.pe_count() <= 6 && ii <= 3 &&
           folded.routed_edges.size() <= 8 && max_dist <= 2;
  }

  int tiny_horizon() const { return ii + 6; }

  bool exhaustive_search(long long budget) {
    const int H = tiny_horizon();
    long long visits = 0;
    std::map<std::pair<int, int>, std::pair<int, int>> claims;  // (res,tau)->(net,abs_t)

    auto timing_ok = [&](int id) {
      // Check all edges with both endpoints placed that touch id.
      for (size_t e = 0; e < dfg.edges.size(); ++e) {
        const DFGEdge& edge = dfg.edges[e];
        if (edge.src != id && edge.dst != id) continue;
        auto su = place.find(edge.src);
        auto sv = place.find(edge.dst);
        if (su == place.end() || sv == place.end()) continue;
        if (edge.kind == EdgeKind::MemoryOrder) {
          if (sv->second.t + edge.distance * ii < su->second.t + lat_placed(edge.src))
            return false;
          continue;
        }
        const DFGNode* dst = by_id.at(edge.dst);
        if (is_pseudo_op(dst->opcode) || is_pseudo_op(by_id.at(edge.src)->opcode)) continue;
        int exit_t = su->second.t + lat_placed(edge.src) - 1;
        int arrival = sv->second.t + edge.distance * ii;
        if (arrival < exit_t + 1) return false;
      }
      return true;
    };

    // Route the routed edges one at a time with full backtracking.
    std::function<bool(size_t)> route_rec = [&](size_t ei) -> bool {
      if (ei == folded.routed_edges.size()) return true;
      int e_idx = folded.routed_edges[ei];
      const DFGEdge& edge = dfg.edges[e_idx];
      const Placement& pu = place.at(edge.src);
      const Placement& pv = place.at(edge.dst);
      int exit_t = pu.t + lat_placed(edge.src) - 1;
      int arrival = pv.t + edge.distance * ii;
      if (arrival < exit_t + 1) return false;
      if (arrival == exit_t + 1 && pu.pe == pv.pe) {
        Route r;
        r.arrival = arrival;
        routes[e_idx] = r;
        if (route_rec(ei + 1)) return true;
        routes.erase(e_idx);
        return false;
      }
      std::vector<RouteStep> path;
      std::function<bool(int, int)> extend = [&](int res, int abs_t) -> bool {
        if (++visits > budget) return false;
        auto key = std::make_pair(res, abs_t % ii);
        auto own = std::make_pair(edge.src, abs_t);
        auto cit = claims.find(key);
        bool had = cit != claims.end();
        if (had && cit->second != own) return false;  // note: when had, stored == own
        claims[key] = own;
        path.push_back({res, abs_t});
        bool ok = false;
        if (abs_t == arrival) {
          if (rg.nodes[res].pe == pv.pe) {
            Route r;
            r.arrival = arrival;
            r.steps = path;
            routes[e_idx] = r;
            ok = route_rec(ei + 1);
            if (!ok) routes.erase(e_idx);
          }
        } else {
          for (int nxt : storage_succ[res]) {
            if (extend(nxt, abs_t + 1)) {
              ok = true;
              break;
            }
          }
        }
        path.pop_back();
        if (!had) claims.erase(key);
        return ok;
      };
      for (int s : local_storage[pe_lin(pu.pe)])
        if (extend(s, exit_t + 1)) return true;
      return false;
    };

    std::function<bool(size_t)> place_rec = [&](size_t ni) -> bool {
      if (visits > budget) return false;
      if (ni == folded.placeable.size()) return route_rec(0);
      int id = folded.placeable[ni];
      for (const PECoord& pe : candidates.at(id)) {
        for (int t = 0; t + lat_at(id, pe) <= H; ++t) {
          if (++visits > budget) return false;
          if (!fu_span_free(id, pe, t)) continue;
          if (free_bank_port(id, t) < 0) continue;
          claim_fu(id, pe, t);
          if (timing_ok(id) && place_rec(ni + 1)) return true;
          release_fu(id);
        }
      }
      return false;
    };

    // Reset dynamic state.
    for (int e : folded.routed_edges) rip_edge(e);
    std::vector<int> placed_ids;
    for (const auto& [id, pl] : place) placed_ids.push_back(id);
    for (int id : placed_ids) release_fu(id);
    routes.clear();
    failed_edges.clear();

    if (!place_rec(0)) return false;
    // Transfer the claim bookkeeping into the usage table for extraction.
    for (const auto& [e_idx, r] : routes)
      for (const auto& s : r.steps) add_claim(s.resource, s.abs_time, dfg.edges[e_idx].src);
    for (int e : folded.routed_edges)
      if (!routes.count(e)) return false;
    return true;
  }

  Mapping extract() const {
    Mapping m;
    m.ii = ii;
    m.placements = place;
    m.routes = routes;
    m.bank_port = bank_port_of;
    int depth = 0;
    for (const auto& [id, pl] : place) depth = std::max(depth, pl.t + lat_placed(id));
    m.schedule_depth = depth;
    return m;
  }
};

}  // namespace

std::optional<Mapping> place_and_route(const DFG& dfg, const ArchSpec& spec,
                                       const ResourceGraph& rg, const DataLayout& layout,
                                       int ii, const MapperParams& params,
                                       std::string* fail_reason) {
  auto fail = [&](const std::string& why) {
    if (fail_reason) *fail_reason = why;
    return std::nullopt;
  };

  Engine eng(dfg, spec, rg, layout, ii, params);

  // Pigeonhole pre-checks.
  long long slot_demand = 0;
  for (int id : eng.folded.placeable)
    slot_demand += spec.pe_defaults.latency(eng.by_id.at(id)->opcode);
  if (slot_demand > static_cast<long long>(ii) * spec.pe_count())
    return fail("needs " + std::to_string(slot_demand) + " FU slot-cycles but II*PEs = " +
                std::to_string(static_cast<long long>(ii) * spec.pe_count()));
  std::map<int, int> bank_demand;
  for (int id : eng.folded.placeable) {
    const DFGNode* n = eng.by_id.at(id);
    if (is_memory_op(n->opcode)) bank_demand[layout.bank_of(n->array_ref->array)]++;
  }
  for (const auto& [bank, demand] : bank_demand) {
    const BankSpec* bs = spec.bank_by_id(bank);
    if (!bs) return fail("array bank " + std::to_string(bank) + " does not exist");
    if (demand > ii * bs->ports_per_cycle)
      return fail("bank " + std::to_string(bank) + " needs " + std::to_string(demand) +
                  " accesses per iteration but II*ports = " +
                  std::to_string(ii * bs->ports_per_cycle));
  }
  for (int id : eng.folded.placeable)
    if (eng.candidates.at(id).empty())
      return fail("node " + std::to_string(id) + " has no candidate PE (opcode or bank affinity)");

  int iters = params.iters_per_ii > 0
                  ? params.iters_per_ii
                  : std::min(24000, 800 + 220 * static_cast<int>(eng.folded.placeable.size()));

  eng.initial_placement();
  bool placed_all = true;
  for (int id : eng.folded.placeable)
    if (!eng.place.count(id)) placed_all = false;

  if (placed_all && eng.anneal(iters)) return eng.extract();

  if (eng.tiny_applicable()) {
    if (eng.exhaustive_search(4'000'000)) return eng.extract();
    return fail("exhaustive search proves II=" + std::to_string(ii) + " infeasible");
  }
  return fail("annealing budget exhausted (unrouted=" +
              std::to_string(eng.failed_edges.size()) + ", overuse=" +
              std::to_string(eng.overuse_total) + ")");
}

MapResult map_dfg(const DFG& dfg, const ArchSpec& spec, const MapperParams& params) {
  MapResult result;
  try {
    result.layout = assign_banks(dfg, spec);
    result.mii = compute_mii(dfg, spec);
  } catch (const SemanticError& e) {
    result.error = e.what();
    return result;
  }
  ResourceGraph rg = build_resource_graph(spec);
  int max_ii = params.max_ii > 0 ? params.max_ii : 4 * result.mii.mii + 8;
  if (max_ii < result.mii.mii) {
    result.error = "max_ii " + std::to_string(max_ii) + " is below MII " +
                   std::to_string(result.mii.mii);
    result.attempts.push_back({result.mii.mii, false, result.error});
    return result;
  }
  for (int ii = result.mii.mii; ii <= max_ii; ++ii) {
    std::string reason;
    auto m = place_and_route(dfg, spec, rg, result.layout, ii, params, &reason);
    if (m) {
      auto diags = verify_mapping(*m, dfg, spec, rg, result.layout);
      auto aff = check_affinity(*m, dfg, result.layout, spec);
      diags.insert(diags.end(), aff.begin(), aff.end());
      if (has_errors(diags)) {
        result.error = "internal error: mapping fails verification: " + join_diagnostics(diags);
        result.attempts.push_back({ii, false, result.error});
        return result;
      }
      result.ok = true;
      result.mapping = *m;
      result.attempts.push_back({ii, true, ""});
      return result;
    }
    result.attempts.push_back({ii, false, reason});
  }
  result.error = "unmappable within max_ii = " + std::to_string(max_ii);
  return result;
}

}  // namespace cgrakit
