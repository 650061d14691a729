#include "cgrakit/config.hpp"

#include <algorithm>

#include "cgrakit/json_util.hpp"

namespace cgrakit {

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

ConfigProgram emit_config(const Mapping& m, const DFG& dfg, const ArchSpec& spec,
                          const DataLayout& layout) {
  FoldedDFG folded = fold_dfg(dfg);
  ResourceGraph rg = build_resource_graph(spec);
  std::map<int, const DFGNode*> by_id;
  for (const auto& n : dfg.nodes) by_id[n.id] = &n;

  ConfigProgram cfg;
  cfg.ii = m.ii;
  cfg.schedule_depth = m.schedule_depth;
  cfg.stages = (m.schedule_depth + m.ii - 1) / m.ii;
  cfg.adl_hash = adl_content_hash(spec);
  cfg.dfg_name = dfg.name;
  cfg.trip_count = dfg.trip_count;
  cfg.invocations = dfg.invocations;
  cfg.scalars = dfg.scalars;
  cfg.layout = layout;
  cfg.kernel = dfg.kernel;

  cfg.pes.resize(spec.pe_count());
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) {
      PEConfig& pc = cfg.pes[r * spec.cols + c];
      pc.pe = {r, c};
      pc.slots.resize(m.ii);
    }
  auto slot_at = [&](PECoord pe, int tau) -> SlotCfg& {
    return cfg.pes[pe.row * spec.cols + pe.col].slots[tau];
  };

  // FU issue slots.
  for (const auto& [id, pl] : m.placements) {
    const DFGNode* n = by_id.at(id);
    FuCfg fu;
    fu.node = id;
    fu.op = n->opcode;
    fu.stage = pl.t / m.ii;
    for (const auto& feed : folded.feeds.at(id)) {
      OperandCfg op;
      op.distance = feed.distance;
      op.has_init = feed.has_init;
      op.init = feed.init;
      if (feed.kind == OperandFeed::Imm) {
        op.kind = "imm";
        op.imm = feed.imm;
      } else if (feed.kind == OperandFeed::Scalar) {
        op.kind = "scalar";
        op.scalar = feed.scalar;
      } else {
        auto rit = m.routes.find(feed.edge_index);
        if (rit == m.routes.end())
          throw SemanticError("emit_config: edge " + std::to_string(feed.edge_index) +
                              " has no route");
        const Route& route = rit->second;
        if (route.steps.empty()) {
          op.kind = "fu_out";
        } else {
          const ResourceNode& term = rg.nodes[route.steps.back().resource];
          if (term.kind == ResKind::Port) {
            op.kind = "port";
            op.port = rg.port_names_of.at(term.pe)[term.index];
          } else {
            op.kind = "reg";
            op.reg = term.index;
          }
        }
      }
      fu.operands.push_back(op);
    }
    if (is_memory_op(n->opcode)) {
      fu.array = n->array_ref->array;
      fu.bank = layout.bank_of(fu.array);
      auto pit = m.bank_port.find(id);
      fu.bank_port = pit == m.bank_port.end() ? 0 : pit->second;
    }
    SlotCfg& slot = slot_at(pl.pe, pl.t % m.ii);
    if (slot.fu)
      throw SemanticError("emit_config: two ops issue on one PE slot");
    slot.fu = fu;
  }

  // Route latches. A step landing at absolute time T is committed at the end
  // of cycle T-1, so its record lives in slot (T-1) mod II.
  auto src_of = [&](const Route& route, size_t step_idx) -> LatchSrc {
    LatchSrc src;
    if (step_idx == 0) {
      src.kind = "fu";
      return src;
    }
    const ResourceNode& prev = rg.nodes[route.steps[step_idx - 1].resource];
    const ResourceNode& cur = rg.nodes[route.steps[step_idx].resource];
    if (prev.pe == cur.pe) {
      if (prev.kind == ResKind::Port) {
        src.kind = "port";
        src.port = rg.port_names_of.at(prev.pe)[prev.index];
      } else {
        src.kind = "reg";
        src.reg = prev.index;
      }
    } else {
      src.kind = "link";
      src.row = prev.pe.row;
      src.col = prev.pe.col;
      src.port = rg.port_names_of.at(prev.pe)[prev.index];
    }
    return src;
  };
  auto same_src = [](const LatchSrc& a, const LatchSrc& b) {
    return a.kind == b.kind && a.port == b.port && a.reg == b.reg && a.row == b.row &&
           a.col == b.col;
  };

  for (const auto& [e_idx, route] : m.routes) {
    for (size_t s = 0; s < route.steps.size(); ++s) {
      const RouteStep& step = route.steps[s];
      const ResourceNode& rn = rg.nodes[step.resource];
      if (s > 0 && route.steps[s - 1].resource == step.resource) continue;  // register dwell
      int tau = ((step.abs_time - 1) % m.ii + m.ii) % m.ii;
      LatchSrc src = src_of(route, s);
      SlotCfg& slot = slot_at(rn.pe, tau);
      if (rn.kind == ResKind::Port) {
        std::string name = rg.port_names_of.at(rn.pe)[rn.index];
        bool found = false;
        for (const auto& p : slot.ports)
          if (p.port == name) {
            if (!same_src(p.src, src))
              throw SemanticError("emit_config: conflicting selects for port " + name);
            found = true;
          }
        if (!found) slot.ports.push_back({name, src});
      } else {
        bool found = false;
        for (const auto& rw : slot.regs)
          if (rw.reg == rn.index) {
            if (!same_src(rw.src, src))
              throw SemanticError("emit_config: conflicting writes to reg " +
                                  std::to_string(rn.index));
            found = true;
          }
        if (!found) slot.regs.push_back({rn.index, src});
      }
    }
  }

  // Canonical ordering for byte-identical output.
  for (auto& pe : cfg.pes)
    for (auto& slot : pe.slots) {
      std::sort(slot.ports.begin(), slot.ports.end(),
                [](const PortLatchCfg& a, const PortLatchCfg& b) { return a.port < b.port; });
      std::sort(slot.regs.begin(), slot.regs.end(),
                [](const RegLatchCfg& a, const RegLatchCfg& b) { return a.reg < b.reg; });
    }
  return cfg;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json init_to_json(const CarriedInit& init) {
  if (init.is_scalar) return json{{"scalar", init.scalar}};
  return json{{"imm", init.imm}};
}

CarriedInit init_from_json(const json& j) {
  CarriedInit init;
  if (j.contains("scalar")) {
    init.is_scalar = true;
    init.scalar = j["scalar"].get<std::string>();
  } else {
    init.imm = j.at("imm").get<int64_t>();
  }
  return init;
}

json operand_to_json(const OperandCfg& op) {
  json j;
  j["kind"] = op.kind;
  if (op.kind == "port") j["port"] = op.port;
  if (op.kind == "reg") j["reg"] = op.reg;
  if (op.kind == "imm") j["imm"] = op.imm;
  if (op.kind == "scalar") j["scalar"] = op.scalar;
  if (op.distance > 0) j["distance"] = op.distance;
  if (op.has_init) j["init"] = init_to_json(op.init);
  return j;
}

OperandCfg operand_from_json(const json& j, const std::string& where) {
  OperandCfg op;
  op.kind = require_string(j, "kind", where);
  if (op.kind == "port") op.port = require_string(j, "port", where);
  else if (op.kind == "reg") op.reg = require_int(j, "reg", where);
  else if (op.kind == "imm") op.imm = j.at("imm").get<int64_t>();
  else if (op.kind == "scalar") op.scalar = require_string(j, "scalar", where);
  else if (op.kind != "fu_out") throw ParseError(where + ": unknown operand kind " + op.kind);
  op.distance = get_int_or(j, "distance", 0);
  if (j.contains("init")) {
    op.has_init = true;
    op.init = init_from_json(j["init"]);
  }
  return op;
}

json latch_src_to_json(const LatchSrc& s) {
  json j;
  j["kind"] = s.kind;
  if (s.kind == "port" || s.kind == "link") j["port"] = s.port;
  if (s.kind == "reg") j["reg"] = s.reg;
  if (s.kind == "link") {
    j["row"] = s.row;
    j["col"] = s.col;
  }
  return j;
}

LatchSrc latch_src_from_json(const json& j, const std::string& where) {
  LatchSrc s;
  s.kind = require_string(j, "kind", where);
  if (s.kind == "port" || s.kind == "link") s.port = require_string(j, "port", where);
  if (s.kind == "reg") s.reg = require_int(j, "reg", where);
  if (s.kind == "link") {
    s.row = require_int(j, "row", where);
    s.col = require_int(j, "col", where);
  }
  if (s.kind != "fu" && s.kind != "port" && s.kind != "reg" && s.kind != "link")
    throw ParseError(where + ": unknown latch source kind " + s.kind);
  return s;
}

}  // namespace

std::string serialize_config(const ConfigProgram& cfg) {
  json root;
  root["cfg_version"] = 1;
  root["ii"] = cfg.ii;
  root["schedule_depth"] = cfg.schedule_depth;
  root["stages"] = cfg.stages;
  root["adl_hash"] = hex64(cfg.adl_hash);
  root["dfg_name"] = cfg.dfg_name;
  root["trip_count"] = cfg.trip_count;
  root["invocations"] = cfg.invocations;
  root["scalars"] = cfg.scalars;
  root["layout"] = layout_to_json(cfg.layout);
  if (cfg.kernel) root["kernel"] = kernel_params_to_json(*cfg.kernel);
  json pes = json::array();
  for (const auto& pe : cfg.pes) {
    json slots = json::array();
    for (const auto& slot : pe.slots) {
      json js = json::object();
      if (slot.fu) {
        json jf;
        jf["node"] = slot.fu->node;
        jf["op"] = slot.fu->op;
        jf["stage"] = slot.fu->stage;
        json ops = json::array();
        for (const auto& op : slot.fu->operands) ops.push_back(operand_to_json(op));
        jf["operands"] = ops;
        if (!slot.fu->array.empty())
          jf["mem"] = json{{"array", slot.fu->array}, {"bank", slot.fu->bank},
                           {"port", slot.fu->bank_port}};
        js["fu"] = jf;
      }
      if (!slot.ports.empty()) {
        json jp = json::array();
        for (const auto& p : slot.ports)
          jp.push_back(json{{"port", p.port}, {"src", latch_src_to_json(p.src)}});
        js["ports"] = jp;
      }
      if (!slot.regs.empty()) {
        json jr = json::array();
        for (const auto& r : slot.regs)
          jr.push_back(json{{"reg", r.reg}, {"src", latch_src_to_json(r.src)}});
        js["regs"] = jr;
      }
      slots.push_back(js);
    }
    pes.push_back(json{{"row", pe.pe.row}, {"col", pe.pe.col}, {"slots", slots}});
  }
  root["pes"] = pes;
  return root.dump(2) + "\n";
}

ConfigProgram parse_config(const std::string& text) {
  json root = parse_json_text(text, "config");
  reject_unknown_keys(root, {"cfg_version", "ii", "schedule_depth", "stages", "adl_hash",
                             "dfg_name", "trip_count", "invocations", "scalars", "layout",
                             "kernel", "pes"},
                      "config");
  int version = require_int(root, "cfg_version", "config");
  if (version != 1)
    throw ParseError("config: unsupported cfg_version " + std::to_string(version));
  ConfigProgram cfg;
  cfg.ii = require_int(root, "ii", "config");
  if (cfg.ii < 1) throw ParseError("config: ii must be >= 1");
  cfg.schedule_depth = require_int(root, "schedule_depth", "config");
  cfg.stages = get_int_or(root, "stages", 1);
  cfg.adl_hash = std::stoull(require_string(root, "adl_hash", "config"), nullptr, 16);
  cfg.dfg_name = root.contains("dfg_name") ? root["dfg_name"].get<std::string>() : "";
  cfg.trip_count = root.contains("trip_count") ? root["trip_count"].get<int64_t>() : 1;
  cfg.invocations = root.contains("invocations") ? root["invocations"].get<int64_t>() : 1;
  if (root.contains("scalars")) cfg.scalars = root["scalars"].get<std::vector<std::string>>();
  if (root.contains("layout")) cfg.layout = layout_from_json(root["layout"]);
  if (root.contains("kernel")) cfg.kernel = kernel_params_from_json(root["kernel"]);
  if (!root.contains("pes")) throw ParseError("config: missing pes");
  for (size_t p = 0; p < root["pes"].size(); ++p) {
    const json& jp = root["pes"][p];
    const std::string where = "config.pes[" + std::to_string(p) + "]";
    PEConfig pe;
    pe.pe = {require_int(jp, "row", where), require_int(jp, "col", where)};
    if (!jp.contains("slots") || static_cast<int>(jp["slots"].size()) != cfg.ii)
      throw ParseError(where + ": expected exactly II slots");
    for (size_t s = 0; s < jp["slots"].size(); ++s) {
      const json& js = jp["slots"][s];
      const std::string sw = where + ".slots[" + std::to_string(s) + "]";
      SlotCfg slot;
      if (js.contains("fu")) {
        const json& jf = js["fu"];
        FuCfg fu;
        fu.node = get_int_or(jf, "node", -1);
        fu.op = require_string(jf, "op", sw + ".fu");
        fu.stage = get_int_or(jf, "stage", 0);
        if (jf.contains("operands"))
          for (size_t o = 0; o < jf["operands"].size(); ++o)
            fu.operands.push_back(
                operand_from_json(jf["operands"][o], sw + ".fu.operands[" + std::to_string(o) + "]"));
        if (jf.contains("mem")) {
          fu.array = require_string(jf["mem"], "array", sw + ".fu.mem");
          fu.bank = require_int(jf["mem"], "bank", sw + ".fu.mem");
          fu.bank_port = get_int_or(jf["mem"], "port", 0);
        }
        slot.fu = fu;
      }
      if (js.contains("ports"))
        for (const auto& jport : js["ports"])
          slot.ports.push_back({require_string(jport, "port", sw),
                                latch_src_from_json(jport.at("src"), sw + ".src")});
      if (js.contains("regs"))
        for (const auto& jreg : js["regs"])
          slot.regs.push_back({require_int(jreg, "reg", sw),
                               latch_src_from_json(jreg.at("src"), sw + ".src")});
      pe.slots.push_back(slot);
    }
    cfg.pes.push_back(pe);
  }
  return cfg;
}

}  // namespace cgrakit
