#pragma once

// Derivative-propagating execution. Each requested source byte gets its own
// run with fresh shadow state; the source's input instruction seeds the
// derivative pair (+1, -1) and every instruction propagates the two
// directions independently (analytic rules where available, sampling
// elsewhere). Sink observations fold into a per-(source, sink) Jacobian
// keeping the largest-magnitude derivative seen.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pga/ir.hpp"
#include "pga/prox.hpp"
#include "pga/shadow.hpp"
#include "pga/vm.hpp"

namespace pga {

struct SourceSpec {
  std::vector<uint32_t> bytes;  // input byte indices, unique, < input_len

  static SourceSpec all(const Program& p) {
    SourceSpec s;
    for (uint32_t i = 0; i < p.input_len; ++i) s.bytes.push_back(i);
    return s;
  }

  void check_against(const Program& p) const {
    std::vector<bool> seen(p.input_len, false);
    for (uint32_t b : bytes) {
      if (b >= p.input_len) throw std::invalid_argument("source index out of range");
      if (seen[b]) throw std::invalid_argument("duplicate source index");
      seen[b] = true;
    }
  }
};

struct JacobianCell {
  double value = 0.0;
  int8_t direction = 0;     // +1 / -1: which seeded direction produced it
  uint32_t occurrence = 0;  // 1-based sink visit that produced it

  bool operator==(const JacobianCell&) const = default;
};

// Replace-on-strictly-larger-magnitude update.
inline void jacobian_update(JacobianCell& cell, double deriv, int8_t direction,
                            uint32_t occurrence) {
  if (std::fabs(deriv) > std::fabs(cell.value))
    cell = {deriv, direction, occurrence};
}

struct Jacobian {
  std::vector<uint32_t> sources;  // row order
  std::vector<SinkSite> sinks;    // column order
  std::vector<JacobianCell> cells;  // row-major

  JacobianCell& at(size_t row, size_t col) { return cells[row * sinks.size() + col]; }
  const JacobianCell& at(size_t row, size_t col) const {
    return cells[row * sinks.size() + col];
  }
};

struct FastFullDivergence {
  uint32_t source = 0;
  std::string site;
  double fast = 0.0;
  double full = 0.0;
  bool positive_direction = true;
};

struct SourceStats {
  uint32_t source = 0;
  uint32_t labels_allocated = 0;
  bool exhausted = false;
  std::string exhaustion_site;
  uint64_t degenerate_events = 0;
  uint64_t divergences = 0;  // fast vs full disagreement count (verify mode)
};

struct AnalysisStats {
  std::vector<SourceStats> per_source;
  std::vector<FastFullDivergence> divergence_log;  // capped
  static constexpr size_t kDivergenceLogCap = 32;

  bool any_exhausted() const {
    for (const auto& s : per_source)
      if (s.exhausted) return true;
    return false;
  }
};

struct PgaOptions {
  int samples = 5;
  bool fast = true;        // production shortcut sampling
  bool verify = false;     // run full argmin, log fast/full divergences
  bool binarize = false;   // round derivative magnitudes to 0/±1 after each op
  uint64_t step_budget = kDefaultStepBudget;
};

struct PgaResult {
  Jacobian jacobian;
  ExecResult exec;
  AnalysisStats stats;
};

namespace detail {

inline double binarize1(double v) { return v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0; }

inline DerivPair sanitize(DerivPair d, uint64_t& degenerate) {
  if (!std::isfinite(d.pos)) {
    d.pos = 0.0;
    ++degenerate;
  }
  if (!std::isfinite(d.neg)) {
    d.neg = 0.0;
    ++degenerate;
  }
  return d;
}

// Instrumentation state for one source's run.
class PgaHooks {
 public:
  PgaHooks(const Program& p, uint32_t source, const PgaOptions& opt, Jacobian& jac,
           size_t row, SourceStats& stats, AnalysisStats& shared)
      : program_(p), source_(source), opt_(opt), jac_(jac), row_(row),
        stats_(stats), shared_(shared) {}

  void on_start(const Program& p, uint32_t num_regs) {
    shadow_.emplace(p.memory_size, num_regs);
    occurrences_.assign(jac_.sinks.size(), 0);
  }

  void on_instruction(uint32_t block, uint32_t ip) {
    cur_block_ = block;
    cur_ip_ = ip;
  }

  void on_input(const Instruction& ins, uint32_t byte_index, uint32_t dst) {
    if (byte_index == source_) {
      Label l = table_.intern({1.0, -1.0}, {}, site_of(ins));
      shadow_->set_reg(dst, l);
    } else {
      shadow_->set_reg(dst, kZeroLabel);
    }
  }

  void on_value_op(const Instruction& ins, std::span<const OpInput> vals, uint32_t dst) {
    Label labels[2];
    DerivPair pairs[2];
    size_t n = vals.size();
    bool all_zero = true;
    for (size_t k = 0; k < n; ++k) {
      labels[k] = label_of(ins.operands[k]);
      pairs[k] = table_.lookup(labels[k]);
      all_zero &= pairs[k].is_zero();
    }
    if (all_zero) {
      shadow_->set_reg(dst, kZeroLabel);
      return;
    }

    DerivPair d;
    if (has_analytic_derivative(ins.op)) {
      SampleInput x[2];
      for (size_t k = 0; k < n; ++k) x[k] = {vals[k].bits, vals[k].type};
      double comp[2];
      bool degen = false;
      for (size_t k = 0; k < n; ++k) comp[k] = pairs[k].pos;
      d.pos = analytic_derivative(ins.op, ins.type, {x, n}, {comp, n}, &degen);
      for (size_t k = 0; k < n; ++k) comp[k] = pairs[k].neg;
      d.neg = analytic_derivative(ins.op, ins.type, {x, n}, {comp, n}, &degen);
      if (degen) ++stats_.degenerate_events;
    } else {
      SampleInput x[2];
      for (size_t k = 0; k < n; ++k) x[k] = {vals[k].bits, sample_domain(ins, vals[k])};
      double comp[2];
      for (size_t k = 0; k < n; ++k) comp[k] = pairs[k].pos;
      d.pos = sampled(ins, {x, n}, {comp, n}, true);
      for (size_t k = 0; k < n; ++k) comp[k] = pairs[k].neg;
      d.neg = sampled(ins, {x, n}, {comp, n}, false);
    }
    d = sanitize(d, stats_.degenerate_events);
    if (opt_.binarize) d = {binarize1(d.pos), binarize1(d.neg)};
    Label out = table_.intern(d, std::span<const Label>(labels, n), site_of(ins));
    shadow_->set_reg(dst, out);
  }

  void on_load(const Instruction& ins, uint64_t addr, uint32_t width, uint32_t dst) {
    Label loaded = shadow_->load(table_, addr, width);
    Label addr_label = label_of(ins.operands[0]);
    DerivPair pair = table_.lookup(loaded);
    // A derivative on the address marks the loaded value as influenced; the
    // loaded value keeps its own derivative when it already has one.
    if (!table_.lookup(addr_label).is_zero() && pair.is_zero()) {
      Label inputs[2] = {addr_label, loaded};
      Label out = table_.intern({1.0, 1.0}, inputs, site_of(ins));
      shadow_->set_reg(dst, out);
      return;
    }
    shadow_->set_reg(dst, loaded);
  }

  void on_store(const Instruction& ins, uint64_t addr, uint32_t width) {
    shadow_->store(addr, width, label_of(ins.operands[1]));
  }

  void on_memset(uint64_t addr, uint64_t len) { shadow_->clear(addr, len); }
  void on_memcpy(uint64_t dst, uint64_t src, uint64_t len) { shadow_->copy(dst, src, len); }

  void on_sink(const Instruction& ins, uint32_t site) {
    record(site, table_.lookup(label_of(ins.operands[0])));
  }

  // Branch conditions are implicit sinks: the pair is recorded first, then
  // the condition register's label is zeroed (its derivative is built from
  // samples that would change the branch), before control transfers.
  void on_branch(const Instruction& ins, uint32_t site) {
    uint32_t cond = ins.operands[0].reg;
    record(site, table_.lookup(shadow_->reg(cond)));
    shadow_->set_reg(cond, kZeroLabel);
    if (shadow_->reg(cond) != kZeroLabel)
      throw std::logic_error("branch condition label not cleared");
  }

  uint32_t labels_allocated() const { return table_.allocated(); }

 private:
  std::string site_of(const Instruction&) const {
    return program_.blocks[cur_block_].name + ":" + std::to_string(cur_ip_);
  }

  Label label_of(const Operand& o) const {
    return o.is_reg() ? shadow_->reg(o.reg) : kZeroLabel;
  }

  // Sampling domain: casts step in the source value's own type; everything
  // else steps at the operation's width (floats in f64).
  static ScalarType sample_domain(const Instruction& ins, const OpInput& val) {
    if (is_cast(ins.op)) return val.type;
    if (is_float_op(ins.op)) return kF64;
    return ins.type;
  }

  double sampled(const Instruction& ins, std::span<const SampleInput> x,
                 std::span<const double> dx, bool positive) {
    if (opt_.verify) {
      double full = prox_derivative(ins.op, ins.type, x, dx, opt_.samples);
      double fast = prox_derivative_fast(ins.op, ins.type, x, dx, opt_.samples);
      if (fast != full) {
        ++stats_.divergences;
        if (shared_.divergence_log.size() < AnalysisStats::kDivergenceLogCap)
          shared_.divergence_log.push_back({source_, site_of(ins), fast, full, positive});
      }
      return full;
    }
    if (opt_.fast) return prox_derivative_fast(ins.op, ins.type, x, dx, opt_.samples);
    return prox_derivative(ins.op, ins.type, x, dx, opt_.samples);
  }

  void record(uint32_t site, DerivPair pair) {
    uint32_t occ = ++occurrences_[site];
    JacobianCell& cell = jac_.at(row_, site);
    jacobian_update(cell, pair.pos, +1, occ);
    jacobian_update(cell, pair.neg, -1, occ);
  }

  const Program& program_;
  uint32_t source_;
  const PgaOptions& opt_;
  Jacobian& jac_;
  size_t row_;
  SourceStats& stats_;
  AnalysisStats& shared_;
  GradientTable table_;
  std::optional<ShadowMemory> shadow_;
  std::vector<uint32_t> occurrences_;
  uint32_t cur_block_ = 0;
  uint32_t cur_ip_ = 0;
};

}  // namespace detail

inline PgaResult run_pga(const Program& p, std::span<const uint8_t> input,
                         const SourceSpec& sources, const PgaOptions& opt = {}) {
  sources.check_against(p);

  PgaResult res;
  res.jacobian.sources = sources.bytes;
  res.jacobian.sinks = sink_sites(p);
  res.jacobian.cells.assign(sources.bytes.size() * res.jacobian.sinks.size(), {});

  bool have_exec = false;
  for (size_t row = 0; row < sources.bytes.size(); ++row) {
    SourceStats stats;
    stats.source = sources.bytes[row];
    detail::PgaHooks hooks(p, stats.source, opt, res.jacobian, row, stats, res.stats);
    try {
      ExecResult er = interpret(p, input, opt.step_budget, hooks);
      stats.labels_allocated = hooks.labels_allocated();
      if (!have_exec) {
        res.exec = std::move(er);
        have_exec = true;
      }
    } catch (const LabelExhausted& e) {
      stats.labels_allocated = hooks.labels_allocated();
      stats.exhausted = true;
      stats.exhaustion_site = e.site;
      // The failed source makes no dataflow claims.
      for (size_t col = 0; col < res.jacobian.sinks.size(); ++col)
        res.jacobian.at(row, col) = {};
    }
    res.stats.per_source.push_back(std::move(stats));
  }
  if (!have_exec) res.exec = execute(p, input, opt.step_budget);
  return res;
}

}  // namespace pga
