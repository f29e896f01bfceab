#pragma once

// Ground-truth dataflow estimation by input perturbation, and F1 scoring of
// predictor matrices against it. A perturbed execution only counts when its
// full block trace equals the baseline trace (removing implicit flows); a
// flow is real when any counted sample changes the ordered sequence of
// concrete values observed at a sink.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pga/ir.hpp"
#include "pga/vm.hpp"

namespace pga {

struct GroundTruth {
  std::vector<uint32_t> sources;  // one row per input byte
  std::vector<SinkSite> sinks;
  std::vector<uint8_t> cells;  // row-major booleans
  std::vector<uint32_t> samples_run;       // per source
  std::vector<uint32_t> samples_excluded;  // per source (path divergence)
  bool exhaustive = false;

  uint8_t at(size_t row, size_t col) const { return cells[row * sinks.size() + col]; }
  uint32_t counted(size_t row) const { return samples_run[row] - samples_excluded[row]; }
};

struct OracleRefusal : std::runtime_error {
  Termination baseline;
  explicit OracleRefusal(Termination t)
      : std::runtime_error(std::string("ground truth undefined: baseline execution ") +
                           (t.kind == TermKind::trap
                                ? "trapped (" + std::string(trap_name(t.trap)) + ")"
                                : "exhausted its step budget")),
        baseline(t) {}
};

namespace detail {

// Per-sink ordered value sequences from one execution.
inline std::vector<std::vector<uint64_t>> sink_sequences(const ExecResult& r,
                                                         size_t num_sites) {
  std::vector<std::vector<uint64_t>> out(num_sites);
  for (const auto& hit : r.sink_values) out[hit.site].push_back(hit.value);
  return out;
}

}  // namespace detail

// The 10-sample protocol per byte: 0, 255, and each single-bit toggle of the
// original value. Duplicates of the original are run anyway (they trivially
// follow the same path). `exhaustive` replaces the set with all 256 values.
inline std::vector<uint8_t> perturbation_values(uint8_t original, bool exhaustive = false) {
  std::vector<uint8_t> vals;
  if (exhaustive) {
    vals.resize(256);
    for (int v = 0; v < 256; ++v) vals[v] = static_cast<uint8_t>(v);
    return vals;
  }
  vals.push_back(0);
  vals.push_back(255);
  for (int bit = 0; bit < 8; ++bit)
    vals.push_back(static_cast<uint8_t>(original ^ (1u << bit)));
  return vals;
}

inline GroundTruth ground_truth(const Program& p, std::span<const uint8_t> input,
                                uint64_t step_budget = kDefaultStepBudget,
                                bool exhaustive = false) {
  ExecResult base = execute(p, input, step_budget);
  if (base.termination.kind != TermKind::ret) throw OracleRefusal(base.termination);

  GroundTruth gt;
  gt.exhaustive = exhaustive;
  gt.sinks = sink_sites(p);
  for (uint32_t b = 0; b < p.input_len; ++b) gt.sources.push_back(b);
  gt.cells.assign(gt.sources.size() * gt.sinks.size(), 0);
  gt.samples_run.assign(gt.sources.size(), 0);
  gt.samples_excluded.assign(gt.sources.size(), 0);

  auto base_seq = detail::sink_sequences(base, gt.sinks.size());
  std::vector<uint8_t> mutated(input.begin(), input.end());

  for (size_t row = 0; row < gt.sources.size(); ++row) {
    uint32_t byte = gt.sources[row];
    uint8_t original = input[byte];
    for (uint8_t v : perturbation_values(original, exhaustive)) {
      mutated[byte] = v;
      ExecResult r = execute(p, mutated, step_budget);
      ++gt.samples_run[row];
      if (r.trace != base.trace) {
        ++gt.samples_excluded[row];
        continue;
      }
      auto seq = detail::sink_sequences(r, gt.sinks.size());
      for (size_t col = 0; col < gt.sinks.size(); ++col)
        if (seq[col] != base_seq[col]) gt.cells[row * gt.sinks.size() + col] = 1;
    }
    mutated[byte] = original;
  }
  return gt;
}

// ---------------------------------------------------------------------------
// Scoring

struct Metrics {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  uint64_t excluded_cells = 0;  // cells with no counted samples, not scored

  // Empty-positive convention: with no predicted and no real positives,
  // precision and recall are both 1.
  static Metrics from_counts(uint64_t tp, uint64_t fp, uint64_t fn, uint64_t tn,
                             uint64_t excluded = 0) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    m.excluded_cells = excluded;
    m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    m.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
  }
};

// Scores a predicted boolean matrix (same shape as the truth) against the
// ground truth. Cells whose source had every sample excluded are skipped and
// reported in excluded_cells.
inline Metrics score(const std::vector<uint8_t>& predicted, const GroundTruth& truth) {
  if (predicted.size() != truth.cells.size())
    throw std::invalid_argument("prediction shape does not match ground truth");
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0, excluded = 0;
  size_t cols = truth.sinks.size();
  for (size_t row = 0; row < truth.sources.size(); ++row) {
    if (truth.counted(row) == 0) {
      excluded += cols;
      continue;
    }
    for (size_t col = 0; col < cols; ++col) {
      bool pred = predicted[row * cols + col] != 0;
      bool real = truth.at(row, col) != 0;
      if (pred && real) ++tp;
      else if (pred && !real) ++fp;
      else if (!pred && real) ++fn;
      else ++tn;
    }
  }
  return Metrics::from_counts(tp, fp, fn, tn, excluded);
}

}  // namespace pga
