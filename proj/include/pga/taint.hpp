#pragma once

// Baselines sharing the shadow machinery: classic dynamic taint analysis
// (boolean labels, union allocation, no branch zeroing) and the
// binary-gradient ablation (full propagation rules with every derivative
// rounded to 0/±1 after each operation).

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pga/engine.hpp"
#include "pga/ir.hpp"
#include "pga/shadow.hpp"
#include "pga/vm.hpp"

namespace pga {

struct TaintSourceStats {
  uint32_t source = 0;
  uint32_t labels_allocated = 0;
  bool exhausted = false;
  std::string exhaustion_site;
};

struct TaintReport {
  std::vector<uint32_t> sources;
  std::vector<SinkSite> sinks;
  std::vector<uint8_t> cells;  // row-major booleans
  std::vector<TaintSourceStats> per_source;

  uint8_t& at(size_t row, size_t col) { return cells[row * sinks.size() + col]; }
  uint8_t at(size_t row, size_t col) const { return cells[row * sinks.size() + col]; }
  bool any_exhausted() const {
    for (const auto& s : per_source)
      if (s.exhausted) return true;
    return false;
  }
};

struct DtaResult {
  TaintReport report;
  ExecResult exec;
};

namespace detail {

// dfsan-style union allocation: a fresh label per distinct (l1, l2) pair,
// which is what lets taint chains exhaust the 16-bit label space.
class TaintHooks {
 public:
  TaintHooks(const Program& p, uint32_t source, TaintReport& rep, size_t row)
      : program_(p), source_(source), rep_(rep), row_(row) {}

  void on_start(const Program& p, uint32_t num_regs) {
    shadow_.emplace(p.memory_size, num_regs);
  }

  void on_instruction(uint32_t block, uint32_t ip) {
    cur_block_ = block;
    cur_ip_ = ip;
  }

  // Every read of the source byte is a marking event and gets its own label,
  // matching create-label-at-read instrumentation. Unions of distinct labels
  // then allocate fresh ones, which is how taint chains exhaust the space.
  void on_input(const Instruction&, uint32_t byte_index, uint32_t dst) {
    shadow_->set_reg(dst, byte_index == source_ ? fresh() : kZeroLabel);
  }

  void on_value_op(const Instruction& ins, std::span<const OpInput>, uint32_t dst) {
    Label l = kZeroLabel;
    for (const auto& o : ins.operands) l = unite(l, label_of(o));
    shadow_->set_reg(dst, l);
  }

  void on_load(const Instruction& ins, uint64_t addr, uint32_t width, uint32_t dst) {
    Label l = label_of(ins.operands[0]);  // tainted pointer taints the value
    for (uint32_t k = 0; k < width; ++k) l = unite(l, shadow_->byte(addr + k));
    shadow_->set_reg(dst, l);
  }

  void on_store(const Instruction& ins, uint64_t addr, uint32_t width) {
    shadow_->store(addr, width, label_of(ins.operands[1]));
  }

  void on_memset(uint64_t addr, uint64_t len) { shadow_->clear(addr, len); }
  void on_memcpy(uint64_t dst, uint64_t src, uint64_t len) { shadow_->copy(dst, src, len); }

  void on_sink(const Instruction& ins, uint32_t site) {
    if (label_of(ins.operands[0]) != kZeroLabel) rep_.at(row_, site) = 1;
  }

  // Taint has no branch-zeroing rule; the condition's taint bit is recorded
  // and the label left in place.
  void on_branch(const Instruction& ins, uint32_t site) {
    if (shadow_->reg(ins.operands[0].reg) != kZeroLabel) rep_.at(row_, site) = 1;
  }

  uint32_t labels_allocated() const { return next_label_ - 1; }

 private:
  std::string site() const {
    return program_.blocks[cur_block_].name + ":" + std::to_string(cur_ip_);
  }

  Label label_of(const Operand& o) const {
    return o.is_reg() ? shadow_->reg(o.reg) : kZeroLabel;
  }

  Label fresh() {
    if (next_label_ >= kLabelLimit) throw LabelExhausted(site());
    return static_cast<Label>(next_label_++);
  }

  Label unite(Label a, Label b) {
    if (a == kZeroLabel || a == b) return b;
    if (b == kZeroLabel) return a;
    auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = unions_.find(key);
    if (it != unions_.end()) return it->second;
    Label l = fresh();
    unions_.emplace(key, l);
    return l;
  }

  const Program& program_;
  uint32_t source_;
  TaintReport& rep_;
  size_t row_;
  std::optional<ShadowMemory> shadow_;
  uint32_t next_label_ = 1;
  std::map<std::pair<Label, Label>, Label> unions_;
  uint32_t cur_block_ = 0;
  uint32_t cur_ip_ = 0;
};

}  // namespace detail

inline DtaResult run_dta(const Program& p, std::span<const uint8_t> input,
                         const SourceSpec& sources,
                         uint64_t step_budget = kDefaultStepBudget) {
  sources.check_against(p);

  DtaResult res;
  res.report.sources = sources.bytes;
  res.report.sinks = sink_sites(p);
  res.report.cells.assign(sources.bytes.size() * res.report.sinks.size(), 0);

  bool have_exec = false;
  for (size_t row = 0; row < sources.bytes.size(); ++row) {
    TaintSourceStats stats;
    stats.source = sources.bytes[row];
    detail::TaintHooks hooks(p, stats.source, res.report, row);
    try {
      ExecResult er = interpret(p, input, step_budget, hooks);
      stats.labels_allocated = hooks.labels_allocated();
      if (!have_exec) {
        res.exec = std::move(er);
        have_exec = true;
      }
    } catch (const LabelExhausted& e) {
      stats.labels_allocated = hooks.labels_allocated();
      stats.exhausted = true;
      stats.exhaustion_site = e.site;
      for (size_t col = 0; col < res.report.sinks.size(); ++col)
        res.report.at(row, col) = 0;
    }
    res.report.per_source.push_back(std::move(stats));
  }
  if (!have_exec) res.exec = execute(p, input, step_budget);
  return res;
}

// Ablation: identical propagation with derivative magnitudes discarded.
inline PgaResult run_binary_pga(const Program& p, std::span<const uint8_t> input,
                                const SourceSpec& sources, PgaOptions opt = {}) {
  opt.binarize = true;
  return run_pga(p, input, sources, opt);
}

}  // namespace pga
