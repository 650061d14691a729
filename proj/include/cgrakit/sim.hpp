#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgrakit/arch.hpp"
#include "cgrakit/config.hpp"
#include "cgrakit/dfg.hpp"
#include "cgrakit/layout.hpp"

namespace cgrakit {

struct TestBundle {
  DataLayout layout;
  std::map<int, std::vector<uint8_t>> banks;     // live-in images by bank id
  std::map<int, std::vector<uint8_t>> expected;  // golden post-run images
  std::vector<std::string> live_outs;            // arrays compared by verify
  std::optional<KernelParams> kernel;
  std::string dfg_name;
  int64_t trip_count = 1;
  int64_t invocations = 1;
  std::vector<std::string> scalar_names;
  uint64_t seed = 0;
};

// Sequential execution of the kernel semantics (width-wrapped 16-bit
// arithmetic) over named little-endian byte arrays.
void run_reference(const KernelParams& p,
                   std::map<std::string, std::vector<uint8_t>>& arrays);

// Deterministic pseudorandom live-ins; golden image from the reference
// executor (kernel graphs) or the graph interpreter (hand-written graphs).
TestBundle make_test_bundle(const DFG& dfg, const ArchSpec& spec, uint64_t seed);

std::string serialize_bundle(const TestBundle& b);
TestBundle parse_bundle(const std::string& text);

struct SimResult {
  std::map<int, std::vector<uint8_t>> banks;
  int64_t total_cycles = 0;
  int64_t cycles_per_invocation = 0;
  int64_t invocations = 0;
  std::string trace;
};

// Cycle-accurate execution of a ConfigProgram: per-invocation software
// pipeline (prologue fill, II-periodic steady state, epilogue drain), bulk
// live-in load up front and scalar patching between invocations.
SimResult simulate(const ConfigProgram& cfg, const ArchSpec& spec, const TestBundle& bundle,
                   bool trace = false);

struct Mismatch {
  int bank = 0;
  int64_t addr = 0;
  uint8_t got = 0;
  uint8_t want = 0;
};

struct VerifyReport {
  bool pass = true;
  int64_t bytes_compared = 0;
  int64_t total_mismatches = 0;
  std::vector<Mismatch> mismatches;  // first N only
};

VerifyReport verify(const std::map<int, std::vector<uint8_t>>& final_banks,
                    const TestBundle& bundle, int max_report = 16);

}  // namespace cgrakit
