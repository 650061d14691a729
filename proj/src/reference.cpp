// Golden software executor for the generated kernels. Runs the tiled loop
// nests sequentially with the same width-wrapped arithmetic and the same
// coalesced-guard forms as the generated graphs.

#include "cgrakit/sim.hpp"

namespace cgrakit {

namespace {

int64_t ld16(const std::vector<uint8_t>& a, int64_t elem_index) {
  int64_t off = elem_index * 2;
  if (off < 0 || off + 2 > static_cast<int64_t>(a.size()))
    throw SemanticError("reference: index " + std::to_string(elem_index) + " out of bounds");
  uint16_t v = static_cast<uint16_t>(a[off] | (a[off + 1] << 8));
  return static_cast<int16_t>(v);
}

void st16(std::vector<uint8_t>& a, int64_t elem_index, int64_t value) {
  int64_t off = elem_index * 2;
  if (off < 0 || off + 2 > static_cast<int64_t>(a.size()))
    throw SemanticError("reference: index " + std::to_string(elem_index) + " out of bounds");
  uint16_t v = static_cast<uint16_t>(value & 0xFFFF);
  a[off] = static_cast<uint8_t>(v & 0xFF);
  a[off + 1] = static_cast<uint8_t>(v >> 8);
}

int64_t w16(int64_t v) { return wrap_width(v, 16); }

void reference_gemm(const KernelParams& p,
                    std::map<std::string, std::vector<uint8_t>>& arrays) {
  auto& W = arrays.at("W");
  auto& I = arrays.at("I");
  auto& O = arrays.at("O");
  const int TI = p.ti, TJ = p.tj, TK = p.tk, u = p.unroll;

  if (p.variant == "base") {
    for (int i = 0; i < TI; ++i)
      for (int j = 0; j < TJ; ++j)
        for (int k = 0; k < TK; ++k) {
          int64_t prod = w16(ld16(W, i * TK + k) * ld16(I, k * TJ + j));
          st16(O, i * TJ + j, w16(ld16(O, i * TJ + j) + prod));
        }
    return;
  }

  auto tap_sum = [&](int i, int j, int k) {
    int64_t acc = w16(ld16(W, i * TK + k) * ld16(I, k * TJ + j));
    for (int t = 1; t < u; ++t)
      acc = w16(acc + w16(ld16(W, i * TK + k + t) * ld16(I, (k + t) * TJ + j)));
    return acc;
  };

  if (p.variant == "u") {
    for (int i = 0; i < TI; ++i)
      for (int j = 0; j < TJ; ++j)
        for (int k = 0; k < TK; k += u)
          st16(O, i * TJ + j, w16(ld16(O, i * TJ + j) + tap_sum(i, j, k)));
    return;
  }

  // u-c: single coalesced loop, guards as written.
  int i = 0, j = 0, k = 0;
  int64_t trip = static_cast<int64_t>(TI) * TJ * TK / u;
  for (int64_t n = 0; n < trip; ++n) {
    st16(O, i * TJ + j, w16(ld16(O, i * TJ + j) + tap_sum(i, j, k)));
    k = k + u;
    if (k + 1 >= TK) {
      k = 0;
      ++j;
    }
    if (j == TJ) {
      j = 0;
      ++i;
    }
  }
}

void reference_conv(const KernelParams& p,
                    std::map<std::string, std::vector<uint8_t>>& arrays) {
  auto& I = arrays.at("I");
  auto& W = arrays.at("W");
  auto& O = arrays.at("O");
  const int TO1 = p.to1, TO2 = p.to2, TCo = p.tco, K = p.k, Co = p.co;
  const int KK = K * K;
  const int IW = TO2 + K - 1;

  auto tap_sum = [&](int i, int j, int c) {
    int64_t acc = 0;
    for (int k1 = 0; k1 < K; ++k1)
      for (int k2 = 0; k2 < K; ++k2)
        acc = w16(acc + w16(ld16(I, (i + k1) * IW + j + k2) * ld16(W, c * KK + k1 * K + k2)));
    return acc;
  };

  if (p.variant == "base") {
    for (int i = 0; i < TO1; ++i)
      for (int j = 0; j < TO2; ++j)
        for (int c = 0; c < Co; ++c) {
          int64_t temp = 0;
          for (int k1 = 0; k1 < K; ++k1)
            for (int k2 = 0; k2 < K; ++k2)
              temp = w16(temp +
                         w16(ld16(I, (i + k1) * IW + j + k2) * ld16(W, c * KK + k1 * K + k2)));
          st16(O, (c * TO1 + i) * TO2 + j, temp);
        }
    return;
  }

  if (p.variant == "uc1") {
    for (int c0 = 0; c0 < Co / TCo; ++c0)
      for (int i = 0; i < TO1; ++i)
        for (int j = 0; j < TO2; ++j)
          for (int cc = 0; cc < TCo; ++cc) {
            int c = c0 * TCo + cc;
            st16(O, (c * TO1 + i) * TO2 + j, tap_sum(i, j, c));
          }
    return;
  }

  // uc2: fully coalesced, guards as written.
  for (int c0 = 0; c0 < Co / TCo; ++c0) {
    int i = 0, j = 0, c = c0 * TCo;
    int64_t trip = static_cast<int64_t>(TCo) * TO1 * TO2;
    for (int64_t n = 0; n < trip; ++n) {
      st16(O, (c * TO1 + i) * TO2 + j, tap_sum(i, j, c));
      j = j + 1;
      if (j + 1 > TO2) {
        j = 0;
        ++i;
      }
      if (i == TO1) {
        i = 0;
        ++c;
      }
    }
  }
}

}  // namespace

void run_reference(const KernelParams& p,
                   std::map<std::string, std::vector<uint8_t>>& arrays) {
  if (p.kernel == "gemm") {
    reference_gemm(p, arrays);
  } else if (p.kernel == "conv") {
    reference_conv(p, arrays);
  } else {
    throw SemanticError("run_reference: unknown kernel \"" + p.kernel + "\"");
  }
}

}  // namespace cgrakit
