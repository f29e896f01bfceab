#pragma once

// Scalar operation semantics shared by the interpreter and the derivative
// sampler. Integer values are carried as zero-extended 64-bit words; floats
// as f64 bit patterns. Evaluation is pure; nullopt means the operation traps
// (integer division by zero).

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>

#include "pga/ir.hpp"

namespace pga {

inline uint64_t wrap_to(uint64_t v, uint8_t width) {
  return width >= 64 ? v : (v & ((uint64_t(1) << width) - 1));
}

inline int64_t as_signed(uint64_t v, uint8_t width) {
  if (width >= 64) return static_cast<int64_t>(v);
  uint64_t sign = uint64_t(1) << (width - 1);
  uint64_t x = wrap_to(v, width);
  return static_cast<int64_t>((x ^ sign) - sign);
}

// Signed int64 -> f64 rounding toward zero (exact below 2^53).
inline double int_to_f64_trunc(int64_t v) {
  double d = static_cast<double>(v);
  if (d >= 9223372036854775808.0) return std::nextafter(d, 0.0);
  int64_t back = static_cast<int64_t>(d);
  if ((v > 0 && back > v) || (v < 0 && back < v)) d = std::nextafter(d, 0.0);
  return d;
}

// f64 -> signed integer of `width` bits: truncate toward zero, saturate at
// the width bounds, NaN maps to 0.
inline uint64_t f64_to_int_sat(double d, uint8_t width) {
  if (std::isnan(d)) return 0;
  double lo = -std::ldexp(1.0, width - 1);
  double hi = std::ldexp(1.0, width - 1);  // one past the max
  if (d <= lo) return wrap_to(static_cast<uint64_t>(1) << (width - 1), width);
  if (d >= hi) return wrap_to((static_cast<uint64_t>(1) << (width - 1)) - 1, width);
  double t = std::trunc(d);
  return wrap_to(static_cast<uint64_t>(static_cast<int64_t>(t)), width);
}

struct OpInput {
  uint64_t bits = 0;
  ScalarType type;
};

inline std::optional<uint64_t> eval_value_op(Opcode op, ScalarType t,
                                             std::span<const OpInput> in) {
  const uint8_t w = t.width;
  auto u = [&](size_t k) { return wrap_to(in[k].bits, w); };
  auto s = [&](size_t k) { return as_signed(in[k].bits, w); };
  auto f = [&](size_t k) { return detail::bits_to_f64(in[k].bits); };

  switch (op) {
    case Opcode::add: return wrap_to(u(0) + u(1), w);
    case Opcode::sub: return wrap_to(u(0) - u(1), w);
    case Opcode::mul: return wrap_to(u(0) * u(1), w);
    case Opcode::udiv:
      if (u(1) == 0) return std::nullopt;
      return wrap_to(u(0) / u(1), w);
    case Opcode::urem:
      if (u(1) == 0) return std::nullopt;
      return wrap_to(u(0) % u(1), w);
    case Opcode::sdiv: {
      if (u(1) == 0) return std::nullopt;
      int64_t a = s(0), b = s(1);
      if (b == -1) return wrap_to(uint64_t(0) - static_cast<uint64_t>(a), w);
      return wrap_to(static_cast<uint64_t>(a / b), w);
    }
    case Opcode::srem: {
      if (u(1) == 0) return std::nullopt;
      int64_t a = s(0), b = s(1);
      if (b == -1) return 0;
      return wrap_to(static_cast<uint64_t>(a % b), w);
    }
    case Opcode::shl: {
      uint64_t n = u(1);
      return n >= w ? 0 : wrap_to(u(0) << n, w);
    }
    case Opcode::lshr: {
      uint64_t n = u(1);
      return n >= w ? 0 : wrap_to(u(0) >> n, w);
    }
    case Opcode::ashr: {
      uint64_t n = u(1);
      int64_t a = s(0);
      if (n >= w) return wrap_to(a < 0 ? ~uint64_t(0) : 0, w);
      return wrap_to(static_cast<uint64_t>(a >> n), w);
    }
    case Opcode::band: return wrap_to(u(0) & u(1), w);
    case Opcode::bor: return wrap_to(u(0) | u(1), w);
    case Opcode::bxor: return wrap_to(u(0) ^ u(1), w);

    case Opcode::icmp_eq: return u(0) == u(1) ? 1 : 0;
    case Opcode::icmp_ne: return u(0) != u(1) ? 1 : 0;
    case Opcode::icmp_ult: return u(0) < u(1) ? 1 : 0;
    case Opcode::icmp_ule: return u(0) <= u(1) ? 1 : 0;
    case Opcode::icmp_ugt: return u(0) > u(1) ? 1 : 0;
    case Opcode::icmp_slt: return s(0) < s(1) ? 1 : 0;
    case Opcode::icmp_sle: return s(0) <= s(1) ? 1 : 0;
    case Opcode::icmp_sgt: return s(0) > s(1) ? 1 : 0;

    case Opcode::zext: return wrap_to(wrap_to(in[0].bits, in[0].type.width), w);
    case Opcode::sext:
      return wrap_to(static_cast<uint64_t>(as_signed(in[0].bits, in[0].type.width)), w);
    case Opcode::trunc: return wrap_to(in[0].bits, w);
    case Opcode::itof:
      return detail::f64_to_bits(int_to_f64_trunc(as_signed(in[0].bits, in[0].type.width)));
    case Opcode::ftoi: return f64_to_int_sat(detail::bits_to_f64(in[0].bits), w);

    case Opcode::fadd: return detail::f64_to_bits(f(0) + f(1));
    case Opcode::fsub: return detail::f64_to_bits(f(0) - f(1));
    case Opcode::fmul: return detail::f64_to_bits(f(0) * f(1));
    case Opcode::fdiv: return detail::f64_to_bits(f(0) / f(1));
    case Opcode::frem: return detail::f64_to_bits(std::fmod(f(0), f(1)));

    case Opcode::constant:
      return t.is_float() ? in[0].bits : wrap_to(in[0].bits, w);

    default: return std::nullopt;  // not a value op
  }
}

}  // namespace pga
