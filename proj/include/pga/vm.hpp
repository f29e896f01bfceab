#pragma once

// Concrete interpreter for the register-machine IR. One execution core is
// shared by the uninstrumented VM and the dataflow engines: instrumentation
// attaches through a hook object that only ever observes concrete values, so
// analyses cannot perturb the executed path.

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pga/ir.hpp"
#include "pga/ops.hpp"

namespace pga {

enum class TrapKind : uint8_t { none, out_of_bounds, div_by_zero, unassigned_register };
enum class TermKind : uint8_t { ret, trap, budget_exhausted };

struct Termination {
  TermKind kind = TermKind::ret;
  TrapKind trap = TrapKind::none;
  bool operator==(const Termination&) const = default;
};

inline std::string_view trap_name(TrapKind k) {
  switch (k) {
    case TrapKind::out_of_bounds: return "out-of-bounds";
    case TrapKind::div_by_zero: return "div-by-zero";
    case TrapKind::unassigned_register: return "unassigned-register";
    default: return "none";
  }
}

// A sink observation site: an explicit `sink` instruction or a conditional
// branch (branch conditions are implicit sinks). Sites are enumerated in
// program order and identified by "<block>:<instruction index>".
struct SinkSite {
  uint32_t block = 0;
  uint32_t instr = 0;
  std::string id;
  bool is_branch = false;
  bool operator==(const SinkSite&) const = default;
};

inline std::vector<SinkSite> sink_sites(const Program& p) {
  std::vector<SinkSite> out;
  for (uint32_t b = 0; b < p.blocks.size(); ++b)
    for (uint32_t i = 0; i < p.blocks[b].instructions.size(); ++i) {
      Opcode op = p.blocks[b].instructions[i].op;
      if (op == Opcode::sink || op == Opcode::br)
        out.push_back({b, i, p.blocks[b].name + ":" + std::to_string(i),
                       op == Opcode::br});
    }
  return out;
}

struct SinkHit {
  uint32_t site = 0;  // index into sink_sites(p)
  uint64_t value = 0; // raw concrete value observed
  bool operator==(const SinkHit&) const = default;
};

struct ExecResult {
  std::vector<uint32_t> trace;  // block indices, in entry order
  std::vector<SinkHit> sink_values;
  std::vector<std::pair<uint32_t, uint32_t>> coverage;  // sorted unique edges
  Termination termination;
  uint64_t steps = 0;

  bool operator==(const ExecResult&) const = default;

  std::vector<std::string> trace_names(const Program& p) const {
    std::vector<std::string> out;
    out.reserve(trace.size());
    for (uint32_t b : trace) out.push_back(p.blocks[b].name);
    return out;
  }
};

constexpr uint64_t kDefaultStepBudget = 1'000'000;

struct MachineState {
  struct RegSlot {
    uint64_t bits = 0;
    ScalarType type;
    bool assigned = false;
  };
  std::vector<RegSlot> regs;
  std::vector<uint8_t> memory;
};

// Hooks interface: the no-op base used by the plain VM. Instrumented engines
// override what they need; every hook receives concrete values only.
struct NoHooks {
  void on_start(const Program&, uint32_t /*num_regs*/) {}
  void on_instruction(uint32_t /*block*/, uint32_t /*ip*/) {}
  void on_input(const Instruction&, uint32_t /*byte_index*/, uint32_t /*dst*/) {}
  void on_value_op(const Instruction&, std::span<const OpInput> /*inputs*/,
                   uint32_t /*dst*/) {}
  void on_load(const Instruction&, uint64_t /*addr*/, uint32_t /*width*/,
               uint32_t /*dst*/) {}
  void on_store(const Instruction&, uint64_t /*addr*/, uint32_t /*width*/) {}
  void on_memset(uint64_t /*addr*/, uint64_t /*len*/) {}
  void on_memcpy(uint64_t /*dst*/, uint64_t /*src*/, uint64_t /*len*/) {}
  void on_sink(const Instruction&, uint32_t /*site*/) {}
  void on_branch(const Instruction&, uint32_t /*site*/) {}
};

namespace detail {

inline uint64_t load_le(const std::vector<uint8_t>& mem, uint64_t addr, uint32_t width) {
  uint64_t v = 0;
  for (uint32_t k = 0; k < width; ++k)
    v |= static_cast<uint64_t>(mem[addr + k]) << (8 * k);
  return v;
}

inline void store_le(std::vector<uint8_t>& mem, uint64_t addr, uint32_t width, uint64_t v) {
  for (uint32_t k = 0; k < width; ++k)
    mem[addr + k] = static_cast<uint8_t>(v >> (8 * k));
}

}  // namespace detail

template <class Hooks>
ExecResult interpret(const Program& p, std::span<const uint8_t> input,
                     uint64_t step_budget, Hooks& hooks) {
  if (input.size() < p.input_len)
    throw std::invalid_argument("input shorter than program's declared length");

  ExecResult res;
  MachineState m;
  m.regs.resize(size_t(p.max_register()) + 1);
  m.memory.assign(p.memory_size, 0);

  std::unordered_map<std::string_view, uint32_t> block_ix;
  for (uint32_t b = 0; b < p.blocks.size(); ++b) block_ix.emplace(p.blocks[b].name, b);

  auto sites = sink_sites(p);
  std::unordered_map<uint64_t, uint32_t> site_ix;
  for (uint32_t k = 0; k < sites.size(); ++k)
    site_ix.emplace((uint64_t(sites[k].block) << 32) | sites[k].instr, k);

  hooks.on_start(p, static_cast<uint32_t>(m.regs.size()));

  uint32_t cur = 0;
  uint32_t ip = 0;
  res.trace.push_back(cur);

  auto finish = [&](TermKind k, TrapKind t) {
    res.termination = {k, t};
    for (size_t i = 1; i < res.trace.size(); ++i)
      res.coverage.emplace_back(res.trace[i - 1], res.trace[i]);
    std::sort(res.coverage.begin(), res.coverage.end());
    res.coverage.erase(std::unique(res.coverage.begin(), res.coverage.end()),
                       res.coverage.end());
    return res;
  };

  // Reads one operand as (bits, type); immediates carry the given type.
  TrapKind trap = TrapKind::none;
  auto read = [&](const Operand& o, ScalarType imm_type) -> OpInput {
    if (!o.is_reg()) return {o.bits, imm_type};
    const auto& slot = m.regs[o.reg];
    if (!slot.assigned) {
      trap = TrapKind::unassigned_register;
      return {};
    }
    return {slot.bits, slot.type};
  };
  auto write = [&](uint32_t r, uint64_t bits, ScalarType t) {
    m.regs[r] = {t.is_int() ? wrap_to(bits, t.width) : bits, t, true};
  };

  while (true) {
    if (res.steps >= step_budget) return finish(TermKind::budget_exhausted, TrapKind::none);
    ++res.steps;
    hooks.on_instruction(cur, ip);
    const Instruction& ins = p.blocks[cur].instructions[ip];

    switch (ins.op) {
      case Opcode::ret:
        return finish(TermKind::ret, TrapKind::none);

      case Opcode::jmp: {
        cur = block_ix.at(ins.targets[0]);
        ip = 0;
        res.trace.push_back(cur);
        continue;
      }

      case Opcode::br: {
        OpInput c = read(ins.operands[0], kI64);
        if (trap != TrapKind::none) return finish(TermKind::trap, trap);
        uint32_t site = site_ix.at((uint64_t(cur) << 32) | ip);
        res.sink_values.push_back({site, c.bits});
        hooks.on_branch(ins, site);
        cur = block_ix.at(c.bits != 0 ? ins.targets[0] : ins.targets[1]);
        ip = 0;
        res.trace.push_back(cur);
        continue;
      }

      case Opcode::sink: {
        OpInput v = read(ins.operands[0], kI64);
        if (trap != TrapKind::none) return finish(TermKind::trap, trap);
        uint32_t site = site_ix.at((uint64_t(cur) << 32) | ip);
        res.sink_values.push_back({site, v.bits});
        hooks.on_sink(ins, site);
        break;
      }

      case Opcode::input: {
        uint32_t idx = static_cast<uint32_t>(ins.operands[0].bits);
        write(*ins.result, input[idx], kI8);
        hooks.on_input(ins, idx, *ins.result);
        break;
      }

      case Opcode::load: {
        OpInput a = read(ins.operands[0], kI64);
        if (trap != TrapKind::none) return finish(TermKind::trap, trap);
        uint32_t width = ins.type.width / 8;
        if (a.bits + width > m.memory.size() || a.bits + width < a.bits)
          return finish(TermKind::trap, TrapKind::out_of_bounds);
        write(*ins.result, detail::load_le(m.memory, a.bits, width), ins.type);
        hooks.on_load(ins, a.bits, width, *ins.result);
        break;
      }

      case Opcode::store: {
        OpInput a = read(ins.operands[0], kI64);
        OpInput v = read(ins.operands[1], ins.type);
        if (trap != TrapKind::none) return finish(TermKind::trap, trap);
        uint32_t width = ins.type.width / 8;
        if (a.bits + width > m.memory.size() || a.bits + width < a.bits)
          return finish(TermKind::trap, TrapKind::out_of_bounds);
        detail::store_le(m.memory, a.bits, width,
                         ins.type.is_int() ? wrap_to(v.bits, ins.type.width) : v.bits);
        hooks.on_store(ins, a.bits, width);
        break;
      }

      case Opcode::memset: {
        OpInput a = read(ins.operands[0], kI64);
        OpInput v = read(ins.operands[1], kI8);
        OpInput n = read(ins.operands[2], kI64);
        if (trap != TrapKind::none) return finish(TermKind::trap, trap);
        if (a.bits + n.bits > m.memory.size() || a.bits + n.bits < a.bits)
          return finish(TermKind::trap, TrapKind::out_of_bounds);
        std::memset(m.memory.data() + a.bits, static_cast<int>(v.bits & 0xff),
                    static_cast<size_t>(n.bits));
        hooks.on_memset(a.bits, n.bits);
        break;
      }

      case Opcode::memcpy: {
        OpInput d = read(ins.operands[0], kI64);
        OpInput s = read(ins.operands[1], kI64);
        OpInput n = read(ins.operands[2], kI64);
        if (trap != TrapKind::none) return finish(TermKind::trap, trap);
        if (d.bits + n.bits > m.memory.size() || d.bits + n.bits < d.bits ||
            s.bits + n.bits > m.memory.size() || s.bits + n.bits < s.bits)
          return finish(TermKind::trap, TrapKind::out_of_bounds);
        std::memmove(m.memory.data() + d.bits, m.memory.data() + s.bits,
                     static_cast<size_t>(n.bits));
        hooks.on_memcpy(d.bits, s.bits, n.bits);
        break;
      }

      default: {  // value ops, including const
        OpInput ins_vals[2];
        size_t n = ins.operands.size();
        for (size_t k = 0; k < n; ++k) {
          ins_vals[k] = read(ins.operands[k], ins.type);
          if (trap != TrapKind::none) return finish(TermKind::trap, trap);
        }
        auto out = eval_value_op(ins.op, ins.type, std::span<const OpInput>(ins_vals, n));
        if (!out) return finish(TermKind::trap, TrapKind::div_by_zero);
        write(*ins.result, *out, result_type(ins.op, ins.type));
        hooks.on_value_op(ins, std::span<const OpInput>(ins_vals, n), *ins.result);
        break;
      }
    }
    ++ip;
  }
}

// Uninstrumented execution.
inline ExecResult execute(const Program& p, std::span<const uint8_t> input,
                          uint64_t step_budget = kDefaultStepBudget) {
  NoHooks none;
  return interpret(p, input, step_budget, none);
}

}  // namespace pga
