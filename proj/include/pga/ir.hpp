#pragma once

// Register-machine IR: text format, parser, printer, and static validation.
// Programs are ordered lists of named basic blocks over a flat byte memory
// and an input byte string. The first block is the entry block.

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pga {

// ---------------------------------------------------------------------------
// Scalar types

enum class TypeKind : uint8_t { integer, floating };

struct ScalarType {
  TypeKind kind = TypeKind::integer;
  uint8_t width = 32;  // bits: 8/16/32/64 for integers, exactly 64 for floats

  bool is_int() const { return kind == TypeKind::integer; }
  bool is_float() const { return kind == TypeKind::floating; }
  bool operator==(const ScalarType&) const = default;
};

inline constexpr ScalarType kI8{TypeKind::integer, 8};
inline constexpr ScalarType kI16{TypeKind::integer, 16};
inline constexpr ScalarType kI32{TypeKind::integer, 32};
inline constexpr ScalarType kI64{TypeKind::integer, 64};
inline constexpr ScalarType kF64{TypeKind::floating, 64};

inline std::string_view type_name(ScalarType t) {
  if (t.is_float()) return "f64";
  switch (t.width) {
    case 8: return "i8";
    case 16: return "i16";
    case 32: return "i32";
    default: return "i64";
  }
}

inline std::optional<ScalarType> parse_type(std::string_view s) {
  if (s == "i8") return kI8;
  if (s == "i16") return kI16;
  if (s == "i32") return kI32;
  if (s == "i64") return kI64;
  if (s == "f64") return kF64;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Opcodes

enum class Opcode : uint8_t {
  add, sub, mul, udiv, sdiv, urem, srem,
  shl, lshr, ashr, band, bor, bxor,
  icmp_eq, icmp_ne, icmp_ult, icmp_ule, icmp_slt, icmp_sle, icmp_ugt, icmp_sgt,
  zext, sext, trunc, itof, ftoi,
  fadd, fsub, fmul, fdiv, frem,
  constant, input, load, store,
  memset, memcpy,
  sink, br, jmp, ret,
};

struct OpInfo {
  std::string_view name;
  bool has_result;
  bool has_suffix;
  uint8_t operand_count;  // register/immediate operands (excludes block targets)
  uint8_t target_count;   // trailing block-name operands (br, jmp)
};

inline const OpInfo& op_info(Opcode op) {
  static constexpr OpInfo table[] = {
      {"add", true, true, 2, 0},      {"sub", true, true, 2, 0},
      {"mul", true, true, 2, 0},      {"udiv", true, true, 2, 0},
      {"sdiv", true, true, 2, 0},     {"urem", true, true, 2, 0},
      {"srem", true, true, 2, 0},     {"shl", true, true, 2, 0},
      {"lshr", true, true, 2, 0},     {"ashr", true, true, 2, 0},
      {"and", true, true, 2, 0},      {"or", true, true, 2, 0},
      {"xor", true, true, 2, 0},      {"icmp.eq", true, true, 2, 0},
      {"icmp.ne", true, true, 2, 0},  {"icmp.ult", true, true, 2, 0},
      {"icmp.ule", true, true, 2, 0}, {"icmp.slt", true, true, 2, 0},
      {"icmp.sle", true, true, 2, 0}, {"icmp.ugt", true, true, 2, 0},
      {"icmp.sgt", true, true, 2, 0}, {"zext", true, true, 1, 0},
      {"sext", true, true, 1, 0},     {"trunc", true, true, 1, 0},
      {"itof", true, true, 1, 0},     {"ftoi", true, true, 1, 0},
      {"fadd", true, true, 2, 0},     {"fsub", true, true, 2, 0},
      {"fmul", true, true, 2, 0},     {"fdiv", true, true, 2, 0},
      {"frem", true, true, 2, 0},     {"const", true, true, 1, 0},
      {"input", true, true, 1, 0},    {"load", true, true, 1, 0},
      {"store", false, true, 2, 0},   {"memset", false, false, 3, 0},
      {"memcpy", false, false, 3, 0}, {"sink", false, false, 1, 0},
      {"br", false, false, 1, 2},     {"jmp", false, false, 0, 1},
      {"ret", false, false, 0, 0},
  };
  return table[static_cast<size_t>(op)];
}

inline bool is_terminator(Opcode op) {
  return op == Opcode::br || op == Opcode::jmp || op == Opcode::ret;
}

inline bool is_icmp(Opcode op) {
  return op >= Opcode::icmp_eq && op <= Opcode::icmp_sgt;
}

inline bool is_float_op(Opcode op) {
  return op >= Opcode::fadd && op <= Opcode::frem;
}

inline bool is_cast(Opcode op) {
  return op == Opcode::zext || op == Opcode::sext || op == Opcode::trunc ||
         op == Opcode::itof || op == Opcode::ftoi;
}

// Ops whose result the dataflow engines propagate through eval_value_op.
inline bool is_value_op(Opcode op) {
  return op <= Opcode::frem || op == Opcode::constant;
}

// The register type produced by an instruction with suffix `t`.
inline ScalarType result_type(Opcode op, ScalarType t) {
  if (is_icmp(op)) return kI8;  // comparison result is 0/1 as i8
  return t;
}

// ---------------------------------------------------------------------------
// Instructions, blocks, programs

struct Operand {
  enum class Kind : uint8_t { reg, imm };
  Kind kind = Kind::imm;
  uint32_t reg = 0;   // when kind == reg
  uint64_t bits = 0;  // when kind == imm: wrapped integer, or f64 bit pattern

  static Operand make_reg(uint32_t r) { return {Kind::reg, r, 0}; }
  static Operand make_imm(uint64_t b) { return {Kind::imm, 0, b}; }
  bool is_reg() const { return kind == Kind::reg; }
  bool operator==(const Operand&) const = default;
};

struct Instruction {
  Opcode op = Opcode::ret;
  ScalarType type;  // suffix: value/result width (cast destination, load/store width)
  std::optional<uint32_t> result;
  std::vector<Operand> operands;
  std::vector<std::string> targets;  // br: {then, else}; jmp: {target}
  uint32_t line = 0;                 // source line, diagnostics only

  bool operator==(const Instruction& o) const {
    return op == o.op && type == o.type && result == o.result &&
           operands == o.operands && targets == o.targets;
  }
};

struct Block {
  std::string name;
  std::vector<Instruction> instructions;
  bool operator==(const Block&) const = default;
};

struct Program {
  std::vector<Block> blocks;  // blocks[0] is the entry block
  uint32_t input_len = 0;     // declared input length in bytes
  uint32_t memory_size = 256; // flat memory size in bytes

  bool operator==(const Program&) const = default;

  const Block* find_block(std::string_view name) const {
    for (const auto& b : blocks)
      if (b.name == name) return &b;
    return nullptr;
  }

  int block_index(std::string_view name) const {
    for (size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].name == name) return static_cast<int>(i);
    return -1;
  }

  uint32_t max_register() const {
    uint32_t m = 0;
    for (const auto& b : blocks)
      for (const auto& ins : b.instructions) {
        if (ins.result) m = std::max(m, *ins.result);
        for (const auto& o : ins.operands)
          if (o.is_reg()) m = std::max(m, o.reg);
      }
    return m;
  }
};

// ---------------------------------------------------------------------------
// Parsing

struct ParseError : std::runtime_error {
  uint32_t line;
  uint32_t column;
  ParseError(uint32_t ln, uint32_t col, const std::string& msg)
      : std::runtime_error("line " + std::to_string(ln) + ":" +
                           std::to_string(col) + ": " + msg),
        line(ln), column(col) {}
};

namespace detail {

struct Token {
  std::string_view text;
  uint32_t column;
};

// Splits on whitespace and commas; commas are pure separators.
inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == ','; };
  size_t i = 0;
  while (i < line.size()) {
    if (is_sep(line[i])) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    out.push_back({line.substr(start, i - start), static_cast<uint32_t>(start + 1)});
  }
  return out;
}

inline std::optional<uint32_t> parse_reg(std::string_view s) {
  if (s.size() < 2 || s[0] != 'r') return std::nullopt;
  uint32_t v = 0;
  for (char c : s.substr(1)) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<uint32_t>(c - '0');
    if (v > (1u << 24)) return std::nullopt;
  }
  return v;
}

inline bool valid_block_name(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

inline std::optional<uint64_t> parse_int_imm(std::string_view s) {
  bool neg = false;
  if (!s.empty() && s[0] == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    for (char c : s.substr(2)) {
      int d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
      else return std::nullopt;
      v = (v << 4) | static_cast<uint64_t>(d);
    }
  } else {
    for (char c : s) {
      if (c < '0' || c > '9') return std::nullopt;
      v = v * 10 + static_cast<uint64_t>(c - '0');
    }
  }
  return neg ? uint64_t(0) - v : v;
}

inline uint64_t f64_to_bits(double d) { return std::bit_cast<uint64_t>(d); }
inline double bits_to_f64(uint64_t b) { return std::bit_cast<double>(b); }

// Shortest round-trip decimal form; used for canonical printing and reports.
inline std::string format_f64(double d) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, res.ptr);
}

// Maps a mnemonic like "srem.i32", "icmp.slt.i8", or "br" to opcode + suffix.
inline std::optional<std::pair<Opcode, std::optional<ScalarType>>>
parse_mnemonic(std::string_view m) {
  size_t last_dot = m.rfind('.');
  std::string_view base = m;
  std::optional<ScalarType> suffix;
  if (last_dot != std::string_view::npos) {
    if (auto t = parse_type(m.substr(last_dot + 1))) {
      suffix = t;
      base = m.substr(0, last_dot);
    }
  }
  for (int i = 0; i <= static_cast<int>(Opcode::ret); ++i) {
    auto op = static_cast<Opcode>(i);
    if (op_info(op).name == base) return std::make_pair(op, suffix);
  }
  return std::nullopt;
}

}  // namespace detail

// Immediate operands take the instruction's type; integer immediates are
// wrapped to the suffix width at parse time so the printed form is canonical.
Program parse_program(std::string_view text);

std::string print_program(const Program& p);

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
  std::string block;
  uint32_t instr_index = 0;
  std::string rule;

  std::string to_string() const {
    return "block '" + block + "' @" + std::to_string(instr_index) + ": " + rule;
  }
};

std::vector<Diagnostic> validate(const Program& p);

// ---------------------------------------------------------------------------
// Implementation

namespace detail {

inline std::optional<double> parse_float_imm(std::string_view s) {
  // strtod via a bounded copy: from_chars<double> handles all literal forms.
  char buf[64];
  if (s.size() >= sizeof(buf)) return std::nullopt;
  s.copy(buf, s.size());
  buf[s.size()] = '\0';
  char* end = nullptr;
  double v = std::strtod(buf, &end);
  if (end != buf + s.size()) return std::nullopt;
  return v;
}

inline uint64_t mask_bits(uint8_t width) {
  return width >= 64 ? ~uint64_t(0) : ((uint64_t(1) << width) - 1);
}

}  // namespace detail

inline Program parse_program(std::string_view text) {
  Program p;
  bool input_declared = false;
  bool memory_declared = false;
  uint32_t max_input_index = 0;
  bool saw_input_op = false;

  uint32_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos
                                                 ? text.size() - pos
                                                 : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (size_t c = line.find(';'); c != std::string_view::npos)
      line = line.substr(0, c);
    auto toks = detail::tokenize(line);
    if (toks.empty()) continue;

    auto err = [&](uint32_t col, const std::string& msg) -> ParseError {
      return ParseError(line_no, col, msg);
    };

    // Prologue directives.
    if (toks[0].text == "input" && p.blocks.empty()) {
      if (toks.size() != 2) throw err(toks[0].column, "expected: input <bytes>");
      auto v = detail::parse_int_imm(toks[1].text);
      if (!v) throw err(toks[1].column, "bad integer");
      p.input_len = static_cast<uint32_t>(*v);
      input_declared = true;
      continue;
    }
    if (toks[0].text == "memory" && p.blocks.empty()) {
      if (toks.size() != 2) throw err(toks[0].column, "expected: memory <bytes>");
      auto v = detail::parse_int_imm(toks[1].text);
      if (!v || *v == 0 || *v > (1u << 30)) throw err(toks[1].column, "bad memory size");
      p.memory_size = static_cast<uint32_t>(*v);
      memory_declared = true;
      continue;
    }

    if (toks[0].text == "block") {
      if (toks.size() != 2) throw err(toks[0].column, "expected: block <name>:");
      std::string_view name = toks[1].text;
      if (name.empty() || name.back() != ':')
        throw err(toks[1].column, "block name must end with ':'");
      name.remove_suffix(1);
      if (!detail::valid_block_name(name))
        throw err(toks[1].column, "invalid block name");
      p.blocks.push_back(Block{std::string(name), {}});
      continue;
    }

    if (p.blocks.empty())
      throw err(toks[0].column, "instruction outside of a block");

    // Instruction: optional "rN =" prefix, then mnemonic and operands.
    Instruction ins;
    ins.line = line_no;
    size_t t = 0;
    std::optional<uint32_t> result;
    if (toks.size() >= 2 && toks[1].text == "=") {
      auto r = detail::parse_reg(toks[0].text);
      if (!r) throw err(toks[0].column, "bad result register");
      result = r;
      t = 2;
      if (t >= toks.size()) throw err(toks[1].column, "missing opcode");
    }

    auto mn = detail::parse_mnemonic(toks[t].text);
    if (!mn) throw err(toks[t].column, "unknown opcode '" + std::string(toks[t].text) + "'");
    ins.op = mn->first;
    const OpInfo& info = op_info(ins.op);

    if (info.has_suffix) {
      if (!mn->second)
        throw err(toks[t].column, "opcode requires a type suffix");
      ins.type = *mn->second;
    } else if (mn->second) {
      throw err(toks[t].column, "opcode does not take a type suffix");
    }

    if (info.has_result != result.has_value())
      throw err(toks[t].column, info.has_result ? "opcode requires a result register"
                                                : "opcode does not produce a result");
    ins.result = result;
    ++t;

    size_t remaining = toks.size() - t;
    if (remaining != size_t(info.operand_count) + info.target_count)
      throw err(toks.back().column, "expected " +
                std::to_string(info.operand_count + info.target_count) +
                " operand(s), got " + std::to_string(remaining));

    for (size_t k = 0; k < info.operand_count; ++k, ++t) {
      const auto& tok = toks[t];
      if (auto r = detail::parse_reg(tok.text)) {
        ins.operands.push_back(Operand::make_reg(*r));
        continue;
      }
      // Immediate. Builtins, sink, and br conditions require registers.
      if (ins.op == Opcode::memset || ins.op == Opcode::memcpy ||
          ins.op == Opcode::sink || ins.op == Opcode::br)
        throw err(tok.column, "operand must be a register");
      bool addr_pos = (ins.op == Opcode::load && k == 0) ||
                      (ins.op == Opcode::store && k == 0);
      // Immediates live in the operand's domain: f64 for float ops and the
      // ftoi source, integer for everything else (itof's source included).
      bool float_pos = !addr_pos && ((ins.type.is_float() && ins.op != Opcode::itof) ||
                                     ins.op == Opcode::ftoi);
      if (float_pos) {
        auto v = detail::parse_float_imm(tok.text);
        if (!v) throw err(tok.column, "bad float immediate");
        ins.operands.push_back(Operand::make_imm(detail::f64_to_bits(*v)));
      } else {
        auto v = detail::parse_int_imm(tok.text);
        if (!v) throw err(tok.column, "bad integer immediate");
        uint64_t bits = addr_pos ? *v : (*v & detail::mask_bits(ins.type.width));
        ins.operands.push_back(Operand::make_imm(bits));
      }
    }
    for (size_t k = 0; k < info.target_count; ++k, ++t) {
      if (!detail::valid_block_name(toks[t].text))
        throw err(toks[t].column, "invalid block name");
      ins.targets.emplace_back(toks[t].text);
    }

    if (ins.op == Opcode::input) {
      if (ins.operands[0].is_reg())
        throw err(toks[t - 1].column, "input index must be an immediate");
      saw_input_op = true;
      max_input_index = std::max(max_input_index,
                                 static_cast<uint32_t>(ins.operands[0].bits));
    }
    if (ins.op == Opcode::constant && ins.operands[0].is_reg())
      throw err(toks[t - 1].column, "const requires an immediate");

    p.blocks.back().instructions.push_back(std::move(ins));
  }

  if (p.blocks.empty()) throw ParseError(line_no, 1, "program has no blocks");
  if (!input_declared && saw_input_op) p.input_len = max_input_index + 1;
  if (!memory_declared) p.memory_size = 256;
  return p;
}

inline std::string print_program(const Program& p) {
  std::string out;
  out += "input " + std::to_string(p.input_len) + "\n";
  out += "memory " + std::to_string(p.memory_size) + "\n";
  for (const auto& b : p.blocks) {
    out += "block " + b.name + ":\n";
    for (const auto& ins : b.instructions) {
      out += "  ";
      if (ins.result) out += "r" + std::to_string(*ins.result) + " = ";
      const OpInfo& info = op_info(ins.op);
      out += info.name;
      if (info.has_suffix) {
        out += ".";
        out += type_name(ins.type);
      }
      bool first = true;
      for (size_t k = 0; k < ins.operands.size(); ++k) {
        out += first ? " " : ", ";
        first = false;
        const Operand& o = ins.operands[k];
        if (o.is_reg()) {
          out += "r" + std::to_string(o.reg);
        } else {
          bool addr_pos = (ins.op == Opcode::load && k == 0) ||
                          (ins.op == Opcode::store && k == 0);
          bool float_pos = !addr_pos &&
                           ((ins.type.is_float() && ins.op != Opcode::itof) ||
                            ins.op == Opcode::ftoi);
          if (float_pos)
            out += detail::format_f64(detail::bits_to_f64(o.bits));
          else
            out += std::to_string(o.bits);
        }
      }
      for (const auto& tgt : ins.targets) {
        out += first ? " " : ", ";
        first = false;
        out += tgt;
      }
      out += "\n";
    }
  }
  return out;
}

inline std::vector<Diagnostic> validate(const Program& p) {
  std::vector<Diagnostic> out;
  auto flag = [&](const Block& b, uint32_t i, std::string rule) {
    out.push_back({b.name, i, std::move(rule)});
  };

  if (p.blocks.empty()) {
    out.push_back({"", 0, "program has no entry block"});
    return out;
  }
  for (size_t i = 0; i < p.blocks.size(); ++i)
    for (size_t j = i + 1; j < p.blocks.size(); ++j)
      if (p.blocks[i].name == p.blocks[j].name)
        flag(p.blocks[j], 0, "duplicate block name");

  // Registers assigned anywhere, and predecessors of the entry block.
  std::vector<uint32_t> assign_count(size_t(p.max_register()) + 1, 0);
  bool entry_has_preds = false;
  for (const auto& b : p.blocks)
    for (const auto& ins : b.instructions) {
      if (ins.result) ++assign_count[*ins.result];
      for (const auto& tgt : ins.targets)
        if (tgt == p.blocks[0].name) entry_has_preds = true;
    }

  for (const auto& b : p.blocks) {
    if (b.instructions.empty()) {
      flag(b, 0, "missing terminator");
      continue;
    }
    std::vector<bool> assigned(assign_count.size(), false);
    for (size_t i = 0; i < b.instructions.size(); ++i) {
      const auto& ins = b.instructions[i];
      const bool last = i + 1 == b.instructions.size();
      if (is_terminator(ins.op) && !last)
        flag(b, static_cast<uint32_t>(i), "terminator before end of block");
      if (last && !is_terminator(ins.op))
        flag(b, static_cast<uint32_t>(i), "missing terminator");

      // Use-before-assign: per-block, plus a straight-line check for the
      // entry block when nothing can jump back into it. Anything else is
      // left to the runtime unassigned-register trap.
      for (const auto& o : ins.operands) {
        if (!o.is_reg() || assigned[o.reg]) continue;
        bool never_assigned = assign_count[o.reg] == 0;
        bool entry_first_pass = &b == &p.blocks.front() && !entry_has_preds;
        if (never_assigned || entry_first_pass)
          flag(b, static_cast<uint32_t>(i),
               "use of unassigned register r" + std::to_string(o.reg));
      }
      if (ins.result) assigned[*ins.result] = true;

      // Structural checks per opcode.
      for (const auto& tgt : ins.targets)
        if (!p.find_block(tgt))
          flag(b, static_cast<uint32_t>(i), "unknown branch target '" + tgt + "'");

      if (is_float_op(ins.op) && !ins.type.is_float())
        flag(b, static_cast<uint32_t>(i), "float opcode requires f64 suffix");
      if ((ins.op == Opcode::itof) && !ins.type.is_float())
        flag(b, static_cast<uint32_t>(i), "itof result must be f64");
      if ((ins.op == Opcode::ftoi || ins.op == Opcode::zext ||
           ins.op == Opcode::sext || ins.op == Opcode::trunc || is_icmp(ins.op) ||
           (ins.op <= Opcode::bxor)) &&
          ins.type.is_float())
        flag(b, static_cast<uint32_t>(i), "integer opcode requires integer suffix");
      if (ins.op == Opcode::input) {
        if (!(ins.type == kI8))
          flag(b, static_cast<uint32_t>(i), "input reads a byte and requires i8");
        else if (ins.operands[0].bits >= p.input_len)
          flag(b, static_cast<uint32_t>(i),
               "input index " + std::to_string(ins.operands[0].bits) +
                   " out of declared range");
      }
      if ((ins.op == Opcode::load || ins.op == Opcode::store) &&
          !ins.operands[0].is_reg()) {
        uint64_t addr = ins.operands[0].bits;
        uint64_t width = ins.type.width / 8;
        if (addr + width > p.memory_size || addr + width < addr)
          flag(b, static_cast<uint32_t>(i), "static memory access out of bounds");
      }
    }
  }
  return out;
}

}  // namespace pga
