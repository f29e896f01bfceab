#pragma once

// Deterministic dataflow-guided fuzzing harness. One analysis pass over the
// seed ranks input bytes (by gradient magnitude to branch sinks, or randomly
// among branch-tainting bytes for the taint baseline); the selected bytes are
// then swept through all 256 single-byte values while edge coverage
// accumulates. Everything, including the taint mode's byte selection, is a
// pure function of the arguments.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pga/engine.hpp"
#include "pga/ir.hpp"
#include "pga/taint.hpp"
#include "pga/vm.hpp"

namespace pga {

enum class Guidance : uint8_t { pga, dta };

inline std::string_view guidance_name(Guidance g) {
  return g == Guidance::pga ? "pga" : "dta";
}

struct FuzzOptions {
  uint32_t byte_budget = 128;
  uint64_t mutation_budget = 100'000;
  uint64_t checkpoint_interval = 10'000;
  uint64_t rng_seed = 0;  // used (and recorded) by dta byte selection
  int samples = 5;
  bool fast = true;
  uint64_t step_budget = kDefaultStepBudget;
};

struct TrapFinding {
  uint64_t mutation = 0;  // 1-based mutation index
  uint32_t byte = 0;
  uint8_t value = 0;
  TrapKind kind = TrapKind::none;
};

using Edge = std::pair<uint32_t, uint32_t>;

struct CoverageTimeline {
  Guidance guidance = Guidance::pga;
  uint64_t rng_seed = 0;
  std::vector<uint32_t> selected_bytes;
  std::vector<std::pair<uint64_t, uint64_t>> checkpoints;  // (mutations, edges)
  std::map<Edge, uint64_t> first_seen;  // edge -> first mutation covering it
  std::vector<TrapFinding> traps;
  uint64_t mutations_executed = 0;

  size_t final_edge_count() const { return first_seen.size(); }
};

namespace detail {

// Byte ranking for pga guidance: max |cell| over branch sinks, descending,
// ties to the lower byte index. Scale-invariant in the Jacobian.
inline std::vector<uint32_t> rank_bytes_by_gradient(const Jacobian& jac) {
  std::vector<double> key(jac.sources.size(), 0.0);
  for (size_t row = 0; row < jac.sources.size(); ++row)
    for (size_t col = 0; col < jac.sinks.size(); ++col)
      if (jac.sinks[col].is_branch)
        key[row] = std::max(key[row], std::fabs(jac.at(row, col).value));
  std::vector<uint32_t> order(jac.sources.size());
  for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (key[a] != key[b]) return key[a] > key[b];
    return jac.sources[a] < jac.sources[b];
  });
  std::vector<uint32_t> bytes;
  for (uint32_t i : order) bytes.push_back(jac.sources[i]);
  return bytes;
}

// Uniform selection without replacement among bytes tainting at least one
// branch sink. mt19937_64 with an explicit index reduction keeps the
// shuffle identical across platforms.
inline std::vector<uint32_t> pick_tainted_bytes(const TaintReport& rep, uint64_t seed,
                                                size_t want) {
  std::vector<uint32_t> candidates;
  for (size_t row = 0; row < rep.sources.size(); ++row) {
    bool taints = false;
    for (size_t col = 0; col < rep.sinks.size(); ++col)
      if (rep.sinks[col].is_branch && rep.at(row, col)) taints = true;
    if (taints) candidates.push_back(rep.sources[row]);
  }
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i + 1 < candidates.size(); ++i) {
    size_t j = i + static_cast<size_t>(rng() % (candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
  }
  if (candidates.size() > want) candidates.resize(want);
  return candidates;
}

}  // namespace detail

inline CoverageTimeline guided_fuzz(const Program& p, std::span<const uint8_t> seed_input,
                                    Guidance guidance, const FuzzOptions& opt = {}) {
  ExecResult probe = execute(p, seed_input, opt.step_budget);
  if (probe.termination.kind != TermKind::ret)
    throw std::invalid_argument("seed input does not execute to completion");

  CoverageTimeline tl;
  tl.guidance = guidance;
  tl.rng_seed = opt.rng_seed;

  SourceSpec all = SourceSpec::all(p);
  size_t want = std::min<size_t>(opt.byte_budget, p.input_len);
  if (guidance == Guidance::pga) {
    PgaOptions po;
    po.samples = opt.samples;
    po.fast = opt.fast;
    po.step_budget = opt.step_budget;
    PgaResult r = run_pga(p, seed_input, all, po);
    for (const auto& s : r.stats.per_source)
      if (s.exhausted)
        throw std::runtime_error("analysis failed for source byte " +
                                 std::to_string(s.source) + " (" + s.exhaustion_site + ")");
    tl.selected_bytes = detail::rank_bytes_by_gradient(r.jacobian);
    if (tl.selected_bytes.size() > want) tl.selected_bytes.resize(want);
  } else {
    DtaResult r = run_dta(p, seed_input, all, opt.step_budget);
    for (const auto& s : r.report.per_source)
      if (s.exhausted)
        throw std::runtime_error("analysis failed for source byte " +
                                 std::to_string(s.source) + " (" + s.exhaustion_site + ")");
    tl.selected_bytes = detail::pick_tainted_bytes(r.report, opt.rng_seed, want);
  }

  std::vector<uint8_t> scratch(seed_input.begin(), seed_input.end());
  uint64_t last_checkpoint = 0;
  bool done = false;
  for (uint32_t byte : tl.selected_bytes) {
    if (done) break;
    uint8_t original = scratch[byte];
    for (int v = 0; v < 256 && !done; ++v) {
      scratch[byte] = static_cast<uint8_t>(v);
      ++tl.mutations_executed;
      ExecResult r = execute(p, scratch, opt.step_budget);
      if (r.termination.kind == TermKind::trap)
        tl.traps.push_back({tl.mutations_executed, byte, static_cast<uint8_t>(v),
                            r.termination.trap});
      for (const auto& e : r.coverage)
        tl.first_seen.emplace(e, tl.mutations_executed);
      if (opt.checkpoint_interval && tl.mutations_executed % opt.checkpoint_interval == 0) {
        tl.checkpoints.emplace_back(tl.mutations_executed, tl.first_seen.size());
        last_checkpoint = tl.mutations_executed;
      }
      if (tl.mutations_executed >= opt.mutation_budget) done = true;
    }
    scratch[byte] = original;
  }
  if (last_checkpoint != tl.mutations_executed)
    tl.checkpoints.emplace_back(tl.mutations_executed, tl.first_seen.size());
  return tl;
}

}  // namespace pga
