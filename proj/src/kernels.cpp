// GEMM / CONV kernel variants emitted directly as dataflow graphs.
//
// All variants use 16-bit elements and byte offsets relative to each array's
// base. Per-invocation host state (outer loop iteration variables) enters as
// scalar live-ins, either read directly (LIVE_IN nodes) or as initial values
// of loop-carried offset chains. Addresses advance incrementally, so the only
// MUL nodes are the actual products.
//
// Node counts per variant (u = unroll, KK = K*K):
//   gemm base : 9   (offW offI LIVE_IN + 3 loads + MUL + ADD + STORE)
//   gemm u    : 6u + 3          (u=4: 27)
//   gemm u-c  : 6u + 19         (u=4: 43)
//   conv base : 9
//   conv uc1  : 6*KK + 1        (K=3: 55)
//   conv uc2  : 6*KK + 14       (K=3: 68)
// Memory ops: base 4, gemm u / u-c: 2u + 2, conv uc1/uc2: 2*KK + 1.

#include "cgrakit/dfg.hpp"

namespace cgrakit {

namespace {

class Builder {
 public:
  explicit Builder(DFG& dfg) : dfg_(dfg) {}

  int node(const std::string& op) {
    DFGNode n;
    n.id = next_id_++;
    n.opcode = op;
    dfg_.nodes.push_back(n);
    return n.id;
  }
  int node_imm(const std::string& op, int operand_index, int64_t value) {
    int id = node(op);
    dfg_.nodes.back().const_operand = ConstOperand{operand_index, value};
    return id;
  }
  int live_in(const std::string& scalar) {
    int id = node("LIVE_IN");
    dfg_.nodes.back().scalar = scalar;
    return id;
  }
  int load(const std::string& array, const std::string& expr) {
    int id = node("LOAD");
    dfg_.nodes.back().array_ref = ArrayRef{array, expr};
    return id;
  }
  int store(const std::string& array, const std::string& expr) {
    int id = node("STORE");
    dfg_.nodes.back().array_ref = ArrayRef{array, expr};
    return id;
  }
  void edge(int src, int dst, int operand, int distance = 0,
            EdgeKind kind = EdgeKind::Data) {
    DFGEdge e;
    e.src = src;
    e.dst = dst;
    e.operand_index = operand;
    e.distance = distance;
    e.kind = kind;
    dfg_.edges.push_back(e);
  }
  void carried(int src, int dst, int operand, int64_t init_imm) {
    edge(src, dst, operand, 1);
    dfg_.edges.back().init = CarriedInit{false, init_imm, ""};
  }
  void carried_scalar(int src, int dst, int operand, const std::string& scalar) {
    edge(src, dst, operand, 1);
    dfg_.edges.back().init = CarriedInit{true, 0, scalar};
  }
  void mem_order(int src, int dst, int distance) {
    edge(src, dst, 0, distance, EdgeKind::MemoryOrder);
  }

  // Left-fold sum of the given value nodes; returns the final node id.
  int sum_chain(const std::vector<int>& values) {
    int acc = values[0];
    for (size_t i = 1; i < values.size(); ++i) {
      int s = node("ADD");
      edge(acc, s, 0);
      edge(values[i], s, 1);
      acc = s;
    }
    return acc;
  }

 private:
  DFG& dfg_;
  int next_id_ = 0;
};

void require(bool cond, const std::string& message) {
  if (!cond) throw SemanticError("gen_kernel: " + message);
}

KernelParams with_gemm_defaults(KernelParams p) {
  if (p.m == 0) p.m = 64;
  if (p.n == 0) p.n = 64;
  if (p.kdim == 0) p.kdim = 64;
  if (p.unroll == 0) p.unroll = 4;
  if (p.clusters == 0) p.clusters = 4;
  return p;
}

KernelParams with_conv_defaults(KernelParams p) {
  if (p.o1 == 0) p.o1 = 64;
  if (p.o2 == 0) p.o2 = 64;
  if (p.co == 0) p.co = 64;
  if (p.k == 0) p.k = 3;
  if (p.clusters == 0) p.clusters = 4;
  return p;
}

}  // namespace

DFG gen_gemm(const KernelParams& params) {
  KernelParams p = with_gemm_defaults(params);
  require(p.kernel == "gemm", "kernel must be \"gemm\"");
  require(p.variant == "base" || p.variant == "u" || p.variant == "u-c",
          "gemm variant must be base, u, or u-c");
  require(p.ti >= 1 && p.tj >= 1 && p.tk >= 1, "tile dims must be >= 1");
  require(p.clusters >= 1, "clusters must be >= 1");
  require(static_cast<int64_t>(p.m) * p.n % p.clusters == 0, "clusters must divide m*n");
  require(p.kdim % p.tk == 0, "tk must divide kdim");

  DFG dfg;
  dfg.kernel = p;
  dfg.arrays_in = {{"W", {p.ti, p.tk}, 2}, {"I", {p.tk, p.tj}, 2}, {"O", {p.ti, p.tj}, 2}};
  dfg.arrays_out = {{"O", {p.ti, p.tj}, 2}};
  Builder b(dfg);

  if (p.variant == "base") {
    dfg.name = "gemm-base";
    dfg.scalars = {"wrow_off", "icol_off", "o_off"};
    dfg.trip_count = p.tk;
    dfg.invocations = (static_cast<int64_t>(p.m) * p.n / p.clusters) * (p.kdim / p.tk);

    int off_w = b.node_imm("ADD", 1, 2);           // W walks a row: +2 bytes per k
    b.carried_scalar(off_w, off_w, 0, "wrow_off");
    int off_i = b.node_imm("ADD", 1, 2 * p.tj);    // I walks a column: one row per k
    b.carried_scalar(off_i, off_i, 0, "icol_off");
    int o_addr = b.live_in("o_off");
    int lw = b.load("W", "2*(i*TK+k)");
    b.carried_scalar(off_w, lw, 0, "wrow_off");
    int li = b.load("I", "2*(k*TJ+j)");
    b.carried_scalar(off_i, li, 0, "icol_off");
    int lo = b.load("O", "2*(i*TJ+j)");
    b.edge(o_addr, lo, 0);
    int mul = b.node("MUL");
    b.edge(lw, mul, 0);
    b.edge(li, mul, 1);
    int add = b.node("ADD");
    b.edge(lo, add, 0);
    b.edge(mul, add, 1);
    int st = b.store("O", "2*(i*TJ+j)");
    b.edge(o_addr, st, 0);
    b.edge(add, st, 1);
    b.mem_order(st, lo, 1);  // O accumulation recurrence
    return dfg;
  }

  int u = p.unroll;
  require(u >= 1 && p.tk % u == 0, "unroll must divide tk");

  if (p.variant == "u") {
    dfg.name = "gemm-u";
    dfg.scalars = {"wrow_off", "icol_off", "o_off"};
    dfg.trip_count = p.tk / u;
    dfg.invocations = (static_cast<int64_t>(p.m) * p.n / p.clusters) * (p.kdim / p.tk);

    int off_w = b.node_imm("ADD", 1, 2 * u);
    b.carried_scalar(off_w, off_w, 0, "wrow_off");
    int off_i = b.node_imm("ADD", 1, 2 * u * p.tj);
    b.carried_scalar(off_i, off_i, 0, "icol_off");
    int o_addr = b.live_in("o_off");
    std::vector<int> products;
    for (int t = 0; t < u; ++t) {
      int addr_w = -1, addr_i = -1;
      if (t > 0) {
        addr_w = b.node_imm("ADD", 1, 2 * t);
        b.carried_scalar(off_w, addr_w, 0, "wrow_off");
        addr_i = b.node_imm("ADD", 1, 2 * t * p.tj);
        b.carried_scalar(off_i, addr_i, 0, "icol_off");
      }
      int lw = b.load("W", "2*(i*TK+k+" + std::to_string(t) + ")");
      if (t == 0) b.carried_scalar(off_w, lw, 0, "wrow_off");
      else b.edge(addr_w, lw, 0);
      int li = b.load("I", "2*((k+" + std::to_string(t) + ")*TJ+j)");
      if (t == 0) b.carried_scalar(off_i, li, 0, "icol_off");
      else b.edge(addr_i, li, 0);
      int mul = b.node("MUL");
      b.edge(lw, mul, 0);
      b.edge(li, mul, 1);
      products.push_back(mul);
    }
    int sum = b.sum_chain(products);
    int lo = b.load("O", "2*(i*TJ+j)");
    b.edge(o_addr, lo, 0);
    int add = b.node("ADD");
    b.edge(lo, add, 0);
    b.edge(sum, add, 1);
    int st = b.store("O", "2*(i*TJ+j)");
    b.edge(o_addr, st, 0);
    b.edge(add, st, 1);
    b.mem_order(st, lo, 1);
    return dfg;
  }

  // u-c: all three tile loops coalesced; k and j are loop-carried with the
  // guard forms "k+1 >= TK" and "j == TJ" kept as written.
  dfg.name = "gemm-u-c";
  dfg.scalars = {};
  dfg.trip_count = static_cast<int64_t>(p.ti) * p.tj * p.tk / u;
  require(static_cast<int64_t>(p.m) * p.n * p.kdim %
              (static_cast<int64_t>(p.ti) * p.tj * p.tk * p.clusters) == 0,
          "clusters*tile must divide the problem size");
  dfg.invocations = static_cast<int64_t>(p.m) * p.n * p.kdim /
                    (static_cast<int64_t>(p.ti) * p.tj * p.tk * p.clusters);

  int k_inc = b.node_imm("ADD", 1, u);
  int k_p1 = b.node_imm("ADD", 1, 1);
  b.edge(k_inc, k_p1, 0);
  int k_cmp = b.node_imm("CMP_GE", 1, p.tk);
  b.edge(k_p1, k_cmp, 0);
  int k_sel = b.node_imm("SEL", 1, 0);
  b.edge(k_cmp, k_sel, 0);
  b.edge(k_inc, k_sel, 2);
  b.carried(k_sel, k_inc, 0, 0);

  int j_inc = b.node_imm("ADD", 1, 1);
  int j_sel1 = b.node("SEL");
  b.edge(k_cmp, j_sel1, 0);
  b.edge(j_inc, j_sel1, 1);
  int j_cmp = b.node_imm("CMP_EQ", 1, p.tj);
  b.edge(j_sel1, j_cmp, 0);
  int j_sel = b.node_imm("SEL", 1, 0);
  b.edge(j_cmp, j_sel, 0);
  b.edge(j_sel1, j_sel, 2);
  b.carried(j_sel, j_inc, 0, 0);
  b.carried(j_sel, j_sel1, 2, 0);

  // W offset: +2u per step; back to the row start when k wraps; on to the
  // next row (same +2u net) when j wraps as well.
  int w_norm = b.node_imm("ADD", 1, 2 * u);
  int w_kwrap = b.node_imm("ADD", 1, -2 * (p.tk - u));
  int w_inner = b.node("SEL");
  b.edge(j_cmp, w_inner, 0);
  b.edge(w_norm, w_inner, 1);
  b.edge(w_kwrap, w_inner, 2);
  int off_w = b.node("SEL");
  b.edge(k_cmp, off_w, 0);
  b.edge(w_inner, off_w, 1);
  b.edge(w_norm, off_w, 2);
  b.carried(off_w, w_norm, 0, 0);
  b.carried(off_w, w_kwrap, 0, 0);

  // I offset: +2u*TJ per step; k wrap moves to column j+1; j wrap resets.
  int i_norm = b.node_imm("ADD", 1, 2 * u * p.tj);
  int i_kwrap = b.node_imm("ADD", 1, -2 * (p.tk - u) * p.tj + 2);
  int i_jwrap = b.node_imm("ADD", 1, -2 * (p.tk - u) * p.tj - 2 * (p.tj - 1));
  int i_inner = b.node("SEL");
  b.edge(j_cmp, i_inner, 0);
  b.edge(i_jwrap, i_inner, 1);
  b.edge(i_kwrap, i_inner, 2);
  int off_i = b.node("SEL");
  b.edge(k_cmp, off_i, 0);
  b.edge(i_inner, off_i, 1);
  b.edge(i_norm, off_i, 2);
  b.carried(off_i, i_norm, 0, 0);
  b.carried(off_i, i_kwrap, 0, 0);
  b.carried(off_i, i_jwrap, 0, 0);

  // O offset: advances by one element exactly when k wraps.
  int o_step = b.node_imm("ADD", 1, 2);
  int off_o = b.node("SEL");
  b.edge(k_cmp, off_o, 0);
  b.edge(o_step, off_o, 1);
  b.carried(off_o, o_step, 0, 0);
  b.carried(off_o, off_o, 2, 0);

  std::vector<int> products;
  for (int t = 0; t < u; ++t) {
    int addr_w = -1, addr_i = -1;
    if (t > 0) {
      addr_w = b.node_imm("ADD", 1, 2 * t);
      b.carried(off_w, addr_w, 0, 0);
      addr_i = b.node_imm("ADD", 1, 2 * t * p.tj);
      b.carried(off_i, addr_i, 0, 0);
    }
    int lw = b.load("W", "2*(i*TK+k+" + std::to_string(t) + ")");
    if (t == 0) b.carried(off_w, lw, 0, 0);
    else b.edge(addr_w, lw, 0);
    int li = b.load("I", "2*((k+" + std::to_string(t) + ")*TJ+j)");
    if (t == 0) b.carried(off_i, li, 0, 0);
    else b.edge(addr_i, li, 0);
    int mul = b.node("MUL");
    b.edge(lw, mul, 0);
    b.edge(li, mul, 1);
    products.push_back(mul);
  }
  int sum = b.sum_chain(products);
  int lo = b.load("O", "2*(i*TJ+j)");
  b.carried(off_o, lo, 0, 0);
  int add = b.node("ADD");
  b.edge(lo, add, 0);
  b.edge(sum, add, 1);
  int st = b.store("O", "2*(i*TJ+j)");
  b.carried(off_o, st, 0, 0);
  b.edge(add, st, 1);
  b.mem_order(st, lo, 1);
  return dfg;
}

DFG gen_conv(const KernelParams& params) {
  KernelParams p = with_conv_defaults(params);
  require(p.kernel == "conv", "kernel must be \"conv\"");
  require(p.variant == "base" || p.variant == "uc1" || p.variant == "uc2",
          "conv variant must be base, uc1, or uc2");
  require(p.to1 >= 1 && p.to2 >= 1 && p.tco >= 1 && p.k >= 1, "tile dims must be >= 1");
  require(p.clusters >= 1, "clusters must be >= 1");
  require(p.co % p.tco == 0, "tco must divide co");

  const int kk = p.k * p.k;
  const int iw = p.to2 + p.k - 1;  // input row stride (valid convolution)
  const int ih = p.to1 + p.k - 1;

  DFG dfg;
  dfg.kernel = p;
  dfg.arrays_in = {{"I", {ih, iw}, 2}, {"W", {p.co, p.k, p.k}, 2}, {"O", {p.co, p.to1, p.to2}, 2}};
  dfg.arrays_out = {{"O", {p.co, p.to1, p.to2}, 2}};
  Builder b(dfg);

  if (p.variant == "base") {
    // Innermost k2 loop; the accumulator lives in the O cell, so the live-in
    // O image must be zero for temp semantics.
    dfg.name = "conv-base";
    dfg.scalars = {"iw_off", "w_off", "o_off"};
    dfg.trip_count = p.k;
    require(static_cast<int64_t>(p.o1) * p.o2 * p.co * p.k % p.clusters == 0,
            "clusters must divide the invocation count");
    dfg.invocations = static_cast<int64_t>(p.o1) * p.o2 * p.co * p.k / p.clusters;

    int off_i = b.node_imm("ADD", 1, 2);
    b.carried_scalar(off_i, off_i, 0, "iw_off");
    int off_w = b.node_imm("ADD", 1, 2);
    b.carried_scalar(off_w, off_w, 0, "w_off");
    int o_addr = b.live_in("o_off");
    int li = b.load("I", "2*((i+k1)*IW+j+k2)");
    b.carried_scalar(off_i, li, 0, "iw_off");
    int lw = b.load("W", "2*(c*KK+k1*K+k2)");
    b.carried_scalar(off_w, lw, 0, "w_off");
    int mul = b.node("MUL");
    b.edge(li, mul, 0);
    b.edge(lw, mul, 1);
    int lo = b.load("O", "2*((c*TO1+i)*TO2+j)");
    b.edge(o_addr, lo, 0);
    int add = b.node("ADD");
    b.edge(lo, add, 0);
    b.edge(mul, add, 1);
    int st = b.store("O", "2*((c*TO1+i)*TO2+j)");
    b.edge(o_addr, st, 0);
    b.edge(add, st, 1);
    b.mem_order(st, lo, 1);
    return dfg;
  }

  auto tap_expr_i = [&](int t) {
    return "2*((i+" + std::to_string(t / p.k) + ")*IW+j+" + std::to_string(t % p.k) + ")";
  };
  auto tap_expr_w = [&](int t) {
    return "2*(c*KK+" + std::to_string(t) + ")";
  };

  if (p.variant == "uc1") {
    // Both filter loops unrolled; the mapped loop walks the channel tile.
    dfg.name = "conv-uc1";
    dfg.scalars = {"ibase_off", "w0_off", "o0_off"};
    dfg.trip_count = p.tco;
    require(static_cast<int64_t>(p.o1) * p.o2 * (p.co / p.tco) % p.clusters == 0,
            "clusters must divide the invocation count");
    dfg.invocations = static_cast<int64_t>(p.o1) * p.o2 * (p.co / p.tco) / p.clusters;

    int ibase = b.live_in("ibase_off");
    int off_w = b.node_imm("ADD", 1, 2 * kk);
    b.carried_scalar(off_w, off_w, 0, "w0_off");
    int off_o = b.node_imm("ADD", 1, 2 * p.to1 * p.to2);
    b.carried_scalar(off_o, off_o, 0, "o0_off");
    std::vector<int> products;
    for (int t = 0; t < kk; ++t) {
      int li, lw;
      if (t == 0) {
        li = b.load("I", tap_expr_i(t));
        b.edge(ibase, li, 0);
        lw = b.load("W", tap_expr_w(t));
        b.carried_scalar(off_w, lw, 0, "w0_off");
      } else {
        int ai = b.node_imm("ADD", 1, 2 * ((t / p.k) * iw + t % p.k));
        b.edge(ibase, ai, 0);
        li = b.load("I", tap_expr_i(t));
        b.edge(ai, li, 0);
        int aw = b.node_imm("ADD", 1, 2 * t);
        b.carried_scalar(off_w, aw, 0, "w0_off");
        lw = b.load("W", tap_expr_w(t));
        b.edge(aw, lw, 0);
      }
      int mul = b.node("MUL");
      b.edge(li, mul, 0);
      b.edge(lw, mul, 1);
      products.push_back(mul);
    }
    int sum = b.sum_chain(products);
    int st = b.store("O", "2*((c*TO1+i)*TO2+j)");
    b.carried_scalar(off_o, st, 0, "o0_off");
    b.edge(sum, st, 1);
    return dfg;
  }

  // uc2: all loop levels coalesced, guard forms "j+1 > O2" and "i == O1"
  // kept as written.
  dfg.name = "conv-uc2";
  dfg.scalars = {"w0_off", "o0_off"};
  dfg.trip_count = static_cast<int64_t>(p.tco) * p.to1 * p.to2;
  require(static_cast<int64_t>(p.o1) * p.o2 * p.co %
              (static_cast<int64_t>(p.to1) * p.to2 * p.tco * p.clusters) == 0,
          "clusters*tile must divide the problem size");
  dfg.invocations = static_cast<int64_t>(p.o1) * p.o2 * p.co /
                    (static_cast<int64_t>(p.to1) * p.to2 * p.tco * p.clusters);

  int j_inc = b.node_imm("ADD", 1, 1);
  int j_p1 = b.node_imm("ADD", 1, 1);
  b.edge(j_inc, j_p1, 0);
  int j_cmp = b.node_imm("CMP_GT", 1, p.to2);
  b.edge(j_p1, j_cmp, 0);
  int j_sel = b.node_imm("SEL", 1, 0);
  b.edge(j_cmp, j_sel, 0);
  b.edge(j_inc, j_sel, 2);
  b.carried(j_sel, j_inc, 0, 0);

  int i_inc = b.node_imm("ADD", 1, 1);
  int i_sel1 = b.node("SEL");
  b.edge(j_cmp, i_sel1, 0);
  b.edge(i_inc, i_sel1, 1);
  int i_cmp = b.node_imm("CMP_EQ", 1, p.to1);
  b.edge(i_sel1, i_cmp, 0);
  int i_sel = b.node_imm("SEL", 1, 0);
  b.edge(i_cmp, i_sel, 0);
  b.edge(i_sel1, i_sel, 2);
  b.carried(i_sel, i_inc, 0, 0);
  b.carried(i_sel, i_sel1, 2, 0);

  // I base offset: +2 per j step, +2K across a row wrap, full reset when the
  // channel advances (the input image is reused per channel).
  int ci_norm = b.node_imm("ADD", 1, 2);
  int ci_jwrap = b.node_imm("ADD", 1, 2 * p.k);
  int ci_iwrap = b.node_imm("ADD", 1, -2 * ((p.to1 - 1) * iw + p.to2 - 1));
  int ci_inner = b.node("SEL");
  b.edge(j_cmp, ci_inner, 0);
  b.edge(ci_jwrap, ci_inner, 1);
  b.edge(ci_norm, ci_inner, 2);
  int off_i = b.node("SEL");
  b.edge(i_cmp, off_i, 0);
  b.edge(ci_iwrap, off_i, 1);
  b.edge(ci_inner, off_i, 2);
  b.carried(off_i, ci_norm, 0, 0);
  b.carried(off_i, ci_jwrap, 0, 0);
  b.carried(off_i, ci_iwrap, 0, 0);

  // W offset: advances one filter when the channel advances.
  int cw_step = b.node_imm("ADD", 1, 2 * kk);
  int off_w = b.node("SEL");
  b.edge(i_cmp, off_w, 0);
  b.edge(cw_step, off_w, 1);
  b.carried_scalar(off_w, cw_step, 0, "w0_off");
  b.carried_scalar(off_w, off_w, 2, "w0_off");

  // O offset: the coalesced order walks O linearly.
  int off_o = b.node_imm("ADD", 1, 2);
  b.carried_scalar(off_o, off_o, 0, "o0_off");

  std::vector<int> products;
  for (int t = 0; t < kk; ++t) {
    int li, lw;
    if (t == 0) {
      li = b.load("I", tap_expr_i(t));
      b.carried(off_i, li, 0, 0);
      lw = b.load("W", tap_expr_w(t));
      b.carried_scalar(off_w, lw, 0, "w0_off");
    } else {
      int ai = b.node_imm("ADD", 1, 2 * ((t / p.k) * iw + t % p.k));
      b.carried(off_i, ai, 0, 0);
      li = b.load("I", tap_expr_i(t));
      b.edge(ai, li, 0);
      int aw = b.node_imm("ADD", 1, 2 * t);
      b.carried_scalar(off_w, aw, 0, "w0_off");
      lw = b.load("W", tap_expr_w(t));
      b.edge(aw, lw, 0);
    }
    int mul = b.node("MUL");
    b.edge(li, mul, 0);
    b.edge(lw, mul, 1);
    products.push_back(mul);
  }
  int sum = b.sum_chain(products);
  int st = b.store("O", "2*((c*TO1+i)*TO2+j)");
  b.carried_scalar(off_o, st, 0, "o0_off");
  b.edge(sum, st, 1);
  return dfg;
}

DFG gen_kernel(const KernelParams& p) {
  if (p.kernel == "gemm") return gen_gemm(p);
  if (p.kernel == "conv") return gen_conv(p);
  throw SemanticError("gen_kernel: unknown kernel \"" + p.kernel + "\"");
}

// ---------------------------------------------------------------------------
// Run plans
// ---------------------------------------------------------------------------

std::vector<std::map<std::string, int64_t>> build_run_plan(const DFG& dfg) {
  return build_run_plan(dfg.kernel, dfg.scalars, dfg.invocations);
}

std::vector<std::map<std::string, int64_t>> build_run_plan(
    const std::optional<KernelParams>& kernel, const std::vector<std::string>& scalars,
    int64_t invocations) {
  if (!kernel) {
    // Hand-written graphs run each invocation with zeroed scalars.
    std::vector<std::map<std::string, int64_t>> plan;
    for (int64_t i = 0; i < invocations; ++i) {
      std::map<std::string, int64_t> s;
      for (const auto& name : scalars) s[name] = 0;
      plan.push_back(s);
    }
    return plan;
  }
  const KernelParams& p = *kernel;
  std::vector<std::map<std::string, int64_t>> plan;
  if (p.kernel == "gemm") {
    if (p.clusters != 1 || p.m != p.ti || p.n != p.tj || p.kdim != p.tk)
      throw SemanticError("run plan: executable gemm runs require problem == tile and clusters == 1");
    if (p.variant == "u-c") {
      plan.push_back({});
      return plan;
    }
    for (int i = 0; i < p.ti; ++i)
      for (int j = 0; j < p.tj; ++j)
        plan.push_back({{"wrow_off", 2 * i * p.tk},
                        {"icol_off", 2 * j},
                        {"o_off", 2 * (i * p.tj + j)}});
    return plan;
  }
  // conv
  if (p.clusters != 1 || p.o1 != p.to1 || p.o2 != p.to2)
    throw SemanticError("run plan: executable conv runs require problem == tile and clusters == 1");
  const int kk = p.k * p.k;
  const int iw = p.to2 + p.k - 1;
  if (p.variant == "base") {
    for (int i = 0; i < p.to1; ++i)
      for (int j = 0; j < p.to2; ++j)
        for (int c = 0; c < p.co; ++c)
          for (int k1 = 0; k1 < p.k; ++k1)
            plan.push_back({{"iw_off", 2 * ((i + k1) * iw + j)},
                            {"w_off", 2 * (c * kk + k1 * p.k)},
                            {"o_off", 2 * ((c * p.to1 + i) * p.to2 + j)}});
    return plan;
  }
  if (p.variant == "uc1") {
    for (int c0 = 0; c0 < p.co / p.tco; ++c0)
      for (int i = 0; i < p.to1; ++i)
        for (int j = 0; j < p.to2; ++j)
          plan.push_back({{"ibase_off", 2 * (i * iw + j)},
                          {"w0_off", 2 * (c0 * p.tco * kk)},
                          {"o0_off", 2 * (((c0 * p.tco) * p.to1 + i) * p.to2 + j)}});
    return plan;
  }
  for (int c0 = 0; c0 < p.co / p.tco; ++c0)
    plan.push_back({{"w0_off", 2 * (c0 * p.tco * kk)},
                    {"o0_off", 2 * (c0 * p.tco * p.to1 * p.to2)}});
  return plan;
}

}  // namespace cgrakit
