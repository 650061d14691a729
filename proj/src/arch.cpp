#include "cgrakit/arch.hpp"

#include <algorithm>

#include "cgrakit/json_util.hpp"

namespace cgrakit {

namespace {

std::string pe_loc(PECoord c) {
  return "pe[" + std::to_string(c.row) + "][" + std::to_string(c.col) + "]";
}

const std::map<std::string, int>& latency_table() {
  static const std::map<std::string, int> table = {
      {"ADD", 1},    {"SUB", 1},    {"MUL", 2},    {"SHL", 1},    {"SHR", 1},
      {"AND", 1},    {"OR", 1},     {"XOR", 1},    {"CMP_EQ", 1}, {"CMP_NE", 1},
      {"CMP_LT", 1}, {"CMP_LE", 1}, {"CMP_GT", 1}, {"CMP_GE", 1}, {"SEL", 1},
      {"LOAD", 2},   {"STORE", 1},  {"NOP", 1},
  };
  return table;
}

}  // namespace

int default_latency(const std::string& op) {
  auto it = latency_table().find(op);
  return it == latency_table().end() ? 1 : it->second;
}

const std::vector<std::string>& compute_opcodes() {
  static const std::vector<std::string> ops = {
      "ADD", "SUB", "MUL", "SHL",    "SHR",    "AND",    "OR",     "XOR",
      "CMP_EQ", "CMP_NE", "CMP_LT", "CMP_LE", "CMP_GT", "CMP_GE", "SEL", "NOP",
  };
  return ops;
}

std::vector<std::string> RouterSpec::port_names() const {
  std::vector<std::string> names = outputs;
  for (const auto& p : inputs)
    if (std::find(names.begin(), names.end(), p) == names.end()) names.push_back(p);
  return names;
}

bool PESpec::supports(const std::string& op) const {
  return std::find(fu_ops.begin(), fu_ops.end(), op) != fu_ops.end();
}

int PESpec::latency(const std::string& op) const {
  auto it = op_latency.find(op);
  return it == op_latency.end() ? default_latency(op) : it->second;
}

const PESpec& ArchSpec::pe_at(PECoord c) const {
  auto it = pe_overrides.find(c);
  return it == pe_overrides.end() ? pe_defaults : it->second;
}

const BankSpec* ArchSpec::bank_by_id(int id) const {
  for (const auto& b : banks)
    if (b.id == id) return &b;
  return nullptr;
}

int ArchSpec::total_bank_ports() const {
  int total = 0;
  for (const auto& b : banks) total += b.ports_per_cycle;
  return total;
}

// ---------------------------------------------------------------------------
// Template generation
// ---------------------------------------------------------------------------

ArchSpec generate_template(int rows, int cols, TemplateOptions opts) {
  ArchSpec spec;
  spec.name = "cluster" + std::to_string(rows) + "x" + std::to_string(cols);
  spec.rows = rows;
  spec.cols = cols;
  spec.data_width = opts.data_width;

  PESpec interior;
  interior.fu_ops = compute_opcodes();
  for (const auto& op : interior.fu_ops) interior.op_latency[op] = default_latency(op);
  interior.regfile_size = opts.regfile_size;
  spec.pe_defaults = interior;

  // Boundary columns carry the memory units: left column on bank 0, right
  // column on bank 1 (a 1-wide grid is wired to both banks).
  BankSpec bank0{0, opts.bank_size_bytes, opts.bank_ports, {}};
  BankSpec bank1{1, opts.bank_size_bytes, opts.bank_ports, {}};
  for (int r = 0; r < rows; ++r) {
    for (int c : {0, cols - 1}) {
      PECoord coord{r, c};
      PESpec mem = spec.pe_overrides.count(coord) ? spec.pe_overrides[coord] : interior;
      if (!mem.supports("LOAD")) {
        mem.fu_ops.push_back("LOAD");
        mem.fu_ops.push_back("STORE");
        mem.op_latency["LOAD"] = default_latency("LOAD");
        mem.op_latency["STORE"] = default_latency("STORE");
      }
      int bank = (c == 0) ? 0 : 1;
      if (std::find(mem.mem_access.begin(), mem.mem_access.end(), bank) == mem.mem_access.end())
        mem.mem_access.push_back(bank);
      spec.pe_overrides[coord] = mem;
      auto& pes = (bank == 0) ? bank0.connected_pes : bank1.connected_pes;
      if (std::find(pes.begin(), pes.end(), coord) == pes.end()) pes.push_back(coord);
    }
  }
  spec.banks = {bank0, bank1};

  // Torus-free mesh.
  auto add_link = [&](PECoord a, const std::string& ap, PECoord b, const std::string& bp) {
    spec.interconnect.push_back(Link{a, ap, b, bp});
  };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      PECoord here{r, c};
      if (c + 1 < cols) {
        add_link(here, "E", {r, c + 1}, "W");
        add_link({r, c + 1}, "W", here, "E");
      }
      if (r + 1 < rows) {
        add_link(here, "S", {r + 1, c}, "N");
        add_link({r + 1, c}, "N", here, "S");
      }
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

static void validate_pe(const ArchSpec& spec, PECoord c, const PESpec& pe,
                        std::vector<Diagnostic>& out) {
  const std::string where = pe_loc(c);
  for (const auto& [op, lat] : pe.op_latency) {
    if (!pe.supports(op))
      out.push_back({Severity::Error, where, "op_latency names \"" + op + "\" not in fu_ops"});
    if (lat < 1)
      out.push_back({Severity::Error, where, "latency for \"" + op + "\" must be >= 1"});
  }
  if (pe.regfile_size < 0)
    out.push_back({Severity::Error, where, "regfile_size must be >= 0"});
  if ((pe.supports("LOAD") || pe.supports("STORE")) && pe.mem_access.empty())
    out.push_back({Severity::Error, where,
                   "PE supports LOAD/STORE but has no mem_access bank affinity"});
  for (int bank : pe.mem_access) {
    if (!spec.bank_by_id(bank))
      out.push_back({Severity::Error, where, "mem_access names unknown bank " + std::to_string(bank)});
  }
}

std::vector<Diagnostic> validate(const ArchSpec& spec) {
  std::vector<Diagnostic> out;
  if (spec.rows < 1 || spec.cols < 1)
    out.push_back({Severity::Error, "grid", "rows and cols must be >= 1"});
  if (spec.data_width != 8 && spec.data_width != 16 && spec.data_width != 32)
    out.push_back({Severity::Error, "data_width", "must be one of 8, 16, 32"});

  validate_pe(spec, {-1, -1}, spec.pe_defaults, out);
  for (const auto& [coord, pe] : spec.pe_overrides) {
    if (!spec.in_grid(coord))
      out.push_back({Severity::Error, pe_loc(coord), "override outside the grid"});
    validate_pe(spec, coord, pe, out);
  }

  for (size_t i = 0; i < spec.interconnect.size(); ++i) {
    const Link& l = spec.interconnect[i];
    const std::string where = "interconnect[" + std::to_string(i) + "]";
    if (!spec.in_grid(l.src)) {
      out.push_back({Severity::Error, where, "link source " + pe_loc(l.src) + " is outside the grid"});
      continue;
    }
    if (!spec.in_grid(l.dst)) {
      out.push_back({Severity::Error, where, "link target " + pe_loc(l.dst) + " is outside the grid"});
      continue;
    }
    const auto& souts = spec.pe_at(l.src).router.outputs;
    const auto& dins = spec.pe_at(l.dst).router.inputs;
    if (std::find(souts.begin(), souts.end(), l.src_port) == souts.end())
      out.push_back({Severity::Error, where,
                     "port \"" + l.src_port + "\" is not an output of " + pe_loc(l.src)});
    if (std::find(dins.begin(), dins.end(), l.dst_port) == dins.end())
      out.push_back({Severity::Error, where,
                     "port \"" + l.dst_port + "\" is not an input of " + pe_loc(l.dst)});
  }

  std::set<int> bank_ids;
  for (const auto& b : spec.banks) {
    const std::string where = "bank[" + std::to_string(b.id) + "]";
    if (!bank_ids.insert(b.id).second)
      out.push_back({Severity::Error, where, "duplicate bank id"});
    if (b.size_bytes <= 0)
      out.push_back({Severity::Error, where, "size_bytes must be > 0"});
    if (b.ports_per_cycle < 1)
      out.push_back({Severity::Error, where, "ports_per_cycle must be >= 1"});
    if (b.connected_pes.empty())
      out.push_back({Severity::Error, where, "connected_pes must be non-empty"});
    for (const auto& c : b.connected_pes)
      if (!spec.in_grid(c))
        out.push_back({Severity::Error, where, "connected PE " + pe_loc(c) + " is outside the grid"});
  }

  bool any_storage = spec.pe_defaults.regfile_size > 0;
  for (const auto& [coord, pe] : spec.pe_overrides)
    if (pe.regfile_size > 0) any_storage = true;
  if (!any_storage && spec.pe_count() > 0)
    out.push_back({Severity::Warning, "grid",
                   "no register files anywhere: values cannot dwell between cycles"});
  return out;
}

// ---------------------------------------------------------------------------
// ADL parse / serialize
// ---------------------------------------------------------------------------

namespace {

json router_to_json(const RouterSpec& r) {
  return json{{"crossbar", r.crossbar}, {"inputs", r.inputs}, {"outputs", r.outputs}};
}

RouterSpec router_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"crossbar", "inputs", "outputs"}, where);
  RouterSpec r;
  if (j.contains("crossbar")) r.crossbar = j["crossbar"].get<bool>();
  if (j.contains("inputs")) r.inputs = j["inputs"].get<std::vector<std::string>>();
  if (j.contains("outputs")) r.outputs = j["outputs"].get<std::vector<std::string>>();
  return r;
}

json pe_to_json(const PESpec& pe) {
  json j;
  j["fu_ops"] = pe.fu_ops;
  j["op_latency"] = pe.op_latency;
  j["regfile_size"] = pe.regfile_size;
  j["router"] = router_to_json(pe.router);
  if (!pe.mem_access.empty()) j["mem_access"] = pe.mem_access;
  return j;
}

PESpec pe_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"fu_ops", "op_latency", "regfile_size", "router", "mem_access",
                          "row", "col"},
                      where);
  PESpec pe;
  if (j.contains("fu_ops")) pe.fu_ops = j["fu_ops"].get<std::vector<std::string>>();
  else pe.fu_ops = compute_opcodes();
  if (j.contains("op_latency")) {
    pe.op_latency = j["op_latency"].get<std::map<std::string, int>>();
  } else {
    for (const auto& op : pe.fu_ops) pe.op_latency[op] = default_latency(op);
  }
  pe.regfile_size = get_int_or(j, "regfile_size", 4);
  if (j.contains("router")) pe.router = router_from_json(j["router"], where + ".router");
  if (j.contains("mem_access")) pe.mem_access = j["mem_access"].get<std::vector<int>>();
  return pe;
}

PECoord coord_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw ParseError(where + ": expected [row, col]");
  return PECoord{j[0].get<int>(), j[1].get<int>()};
}

std::vector<Link> mesh_links(const ArchSpec& spec) {
  ArchSpec tmp = generate_template(spec.rows, spec.cols);
  return tmp.interconnect;
}

}  // namespace

ArchSpec parse_adl(const std::string& text) {
  json root = parse_json_text(text, "adl");
  reject_unknown_keys(root, {"adl_version", "name", "rows", "cols", "data_width", "pe",
                             "pe_overrides", "interconnect", "banks"},
                      "adl");
  int version = require_int(root, "adl_version", "adl");
  if (version != 1) throw ParseError("adl: unsupported adl_version " + std::to_string(version));

  ArchSpec spec;
  spec.name = root.contains("name") ? require_string(root, "name", "adl") : "unnamed";
  spec.rows = require_int(root, "rows", "adl");
  spec.cols = require_int(root, "cols", "adl");
  spec.data_width = get_int_or(root, "data_width", 16);
  if (root.contains("pe")) spec.pe_defaults = pe_from_json(root["pe"], "adl.pe");
  else spec.pe_defaults = generate_template(1, 1).pe_defaults;

  if (root.contains("pe_overrides")) {
    if (!root["pe_overrides"].is_array()) throw ParseError("adl.pe_overrides: expected an array");
    for (size_t i = 0; i < root["pe_overrides"].size(); ++i) {
      const json& o = root["pe_overrides"][i];
      const std::string where = "adl.pe_overrides[" + std::to_string(i) + "]";
      PECoord c{require_int(o, "row", where), require_int(o, "col", where)};
      spec.pe_overrides[c] = pe_from_json(o, where);
    }
  }

  if (root.contains("interconnect")) {
    const json& ic = root["interconnect"];
    if (ic.is_string()) {
      if (ic.get<std::string>() != "mesh")
        throw ParseError("adl.interconnect: unknown keyword \"" + ic.get<std::string>() + "\"");
      spec.interconnect = mesh_links(spec);
    } else if (ic.is_array()) {
      for (size_t i = 0; i < ic.size(); ++i) {
        const std::string where = "adl.interconnect[" + std::to_string(i) + "]";
        reject_unknown_keys(ic[i], {"src", "src_port", "dst", "dst_port"}, where);
        Link l;
        l.src = coord_from_json(ic[i].at("src"), where + ".src");
        l.dst = coord_from_json(ic[i].at("dst"), where + ".dst");
        l.src_port = require_string(ic[i], "src_port", where);
        l.dst_port = require_string(ic[i], "dst_port", where);
        spec.interconnect.push_back(l);
      }
    } else {
      throw ParseError("adl.interconnect: expected \"mesh\" or an array of links");
    }
  }

  if (root.contains("banks")) {
    if (!root["banks"].is_array()) throw ParseError("adl.banks: expected an array");
    for (size_t i = 0; i < root["banks"].size(); ++i) {
      const json& b = root["banks"][i];
      const std::string where = "adl.banks[" + std::to_string(i) + "]";
      reject_unknown_keys(b, {"id", "size_bytes", "ports_per_cycle", "connected_pes"}, where);
      BankSpec bank;
      bank.id = require_int(b, "id", where);
      bank.size_bytes = get_int_or(b, "size_bytes", 8192);
      bank.ports_per_cycle = get_int_or(b, "ports_per_cycle", 1);
      if (b.contains("connected_pes"))
        for (const auto& c : b["connected_pes"])
          bank.connected_pes.push_back(coord_from_json(c, where + ".connected_pes"));
      spec.banks.push_back(bank);
    }
  }

  auto diags = validate(spec);
  if (has_errors(diags)) throw SemanticError("adl: " + join_diagnostics(diags), diags);
  return spec;
}

std::string serialize_adl(const ArchSpec& spec) {
  json root;
  root["adl_version"] = 1;
  root["name"] = spec.name;
  root["rows"] = spec.rows;
  root["cols"] = spec.cols;
  root["data_width"] = spec.data_width;
  root["pe"] = pe_to_json(spec.pe_defaults);
  if (!spec.pe_overrides.empty()) {
    json arr = json::array();
    for (const auto& [coord, pe] : spec.pe_overrides) {
      json o = pe_to_json(pe);
      o["row"] = coord.row;
      o["col"] = coord.col;
      arr.push_back(o);
    }
    root["pe_overrides"] = arr;
  }
  json links = json::array();
  for (const auto& l : spec.interconnect) {
    links.push_back(json{{"src", {l.src.row, l.src.col}},
                         {"src_port", l.src_port},
                         {"dst", {l.dst.row, l.dst.col}},
                         {"dst_port", l.dst_port}});
  }
  root["interconnect"] = links;
  json banks = json::array();
  for (const auto& b : spec.banks) {
    json cps = json::array();
    for (const auto& c : b.connected_pes) cps.push_back({c.row, c.col});
    banks.push_back(json{{"id", b.id},
                         {"size_bytes", b.size_bytes},
                         {"ports_per_cycle", b.ports_per_cycle},
                         {"connected_pes", cps}});
  }
  root["banks"] = banks;
  return root.dump(2) + "\n";
}

uint64_t adl_content_hash(const ArchSpec& spec) { return fnv1a64(serialize_adl(spec)); }

// ---------------------------------------------------------------------------
// Resource graph expansion
// ---------------------------------------------------------------------------

int ResourceGraph::port_index(PECoord pe, const std::string& name) const {
  auto it = port_names_of.find(pe);
  if (it == port_names_of.end()) return -1;
  for (size_t i = 0; i < it->second.size(); ++i)
    if (it->second[i] == name) return static_cast<int>(i);
  return -1;
}

ResourceGraph build_resource_graph(const ArchSpec& spec) {
  ResourceGraph g;
  auto add_node = [&](ResourceNode n) {
    g.nodes.push_back(std::move(n));
    return static_cast<int>(g.nodes.size()) - 1;
  };

  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      PECoord pe{r, c};
      const PESpec& ps = spec.pe_at(pe);
      std::string tag = std::to_string(r) + "_" + std::to_string(c);
      g.fu_of[pe] = add_node({ResKind::Fu, pe, 0, -1, "fu_" + tag});
      auto names = ps.router.port_names();
      g.port_names_of[pe] = names;
      for (size_t i = 0; i < names.size(); ++i)
        g.port_of[{pe, static_cast<int>(i)}] =
            add_node({ResKind::Port, pe, static_cast<int>(i), -1, "port_" + tag + "_" + names[i]});
      for (int i = 0; i < ps.regfile_size; ++i)
        g.reg_of[{pe, i}] =
            add_node({ResKind::Reg, pe, i, -1, "reg_" + tag + "_" + std::to_string(i)});
    }
  }
  for (const auto& b : spec.banks) {
    for (int p = 0; p < b.ports_per_cycle; ++p)
      g.bank_ports_of[b.id].push_back(add_node(
          {ResKind::BankPort, {}, p, b.id, "bank" + std::to_string(b.id) + "_p" + std::to_string(p)}));
  }

  auto add_edge = [&](int a, int b, int delay) { g.edges.push_back({a, b, delay}); };

  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      PECoord pe{r, c};
      const PESpec& ps = spec.pe_at(pe);
      int fu = g.fu_of.at(pe);
      int nports = static_cast<int>(g.port_names_of.at(pe).size());
      add_edge(fu, fu, 1);  // fu_out bypass to the next local issue
      for (int i = 0; i < nports; ++i) {
        int port = g.port_of.at({pe, i});
        add_edge(fu, port, 1);
        add_edge(port, fu, 0);
        for (int j = 0; j < nports; ++j)
          if (j != i) add_edge(port, g.port_of.at({pe, j}), 1);
        for (int k = 0; k < ps.regfile_size; ++k) {
          add_edge(port, g.reg_of.at({pe, k}), 1);
        }
      }
      for (int k = 0; k < ps.regfile_size; ++k) {
        int reg = g.reg_of.at({pe, k});
        add_edge(fu, reg, 1);
        add_edge(reg, reg, 1);  // dwell
        add_edge(reg, fu, 0);
        for (int i = 0; i < nports; ++i) add_edge(reg, g.port_of.at({pe, i}), 1);
      }
      for (int bank : ps.mem_access) {
        auto it = g.bank_ports_of.find(bank);
        if (it == g.bank_ports_of.end()) continue;
        for (int bp : it->second) add_edge(fu, bp, 0);
      }
    }
  }

  // Each declared link contributes exactly one edge.
  for (const auto& l : spec.interconnect) {
    int sp = g.port_index(l.src, l.src_port);
    int dp = g.port_index(l.dst, l.dst_port);
    if (sp < 0 || dp < 0) continue;  // validate() reports these
    add_edge(g.port_of.at({l.src, sp}), g.port_of.at({l.dst, dp}), 1);
  }

  g.out_edges.resize(g.nodes.size());
  for (size_t i = 0; i < g.edges.size(); ++i)
    g.out_edges[g.edges[i].src].push_back(static_cast<int>(i));
  return g;
}

}  // namespace cgrakit
