#pragma once

// Per-operation derivative evaluation. Smooth float ops (and integer
// add/sub/mul) use analytic rules; everything else is sampled: shifted
// copies of the inputs are evaluated along the incoming derivative
// direction, and the sample minimizing -|change| + half the squared step
// distance defines the derivative. A fast variant returns the first sample
// that changes the output. brute_force_prox is an independent straight-line
// implementation of the same contract, kept for cross-checking.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pga/ir.hpp"
#include "pga/ops.hpp"

namespace pga {

// One input to a sampled operation: its concrete base value and the domain
// the sampling steps in (the operation's width for binary ops, the source
// type for casts, f64 for float inputs).
struct SampleInput {
  uint64_t bits = 0;
  ScalarType type;
};

namespace detail {

// Offset applied to one input at step i: integer domains round the shift to
// the nearest whole step and wrap at the domain width; float domains step by
// the exact real amount. Returns false if the shifted value is unusable.
struct Shifted {
  uint64_t bits = 0;
  double offset = 0.0;  // distance contribution before squaring
  bool usable = true;
};

inline Shifted shift_input(const SampleInput& in, double deriv, int step) {
  Shifted s;
  if (deriv == 0.0) {
    s.bits = in.bits;
    return s;
  }
  double amount = deriv * static_cast<double>(step);
  if (in.type.is_float()) {
    double x = bits_to_f64(in.bits) + amount;
    if (!std::isfinite(x)) {
      s.usable = false;
      return s;
    }
    s.bits = f64_to_bits(x);
    s.offset = amount;
    return s;
  }
  if (!(std::fabs(amount) < 9.0e18)) amount = std::copysign(9.0e18, amount);
  int64_t off = std::llround(amount);
  s.bits = wrap_to(in.bits + static_cast<uint64_t>(off), in.type.width);
  s.offset = static_cast<double>(off);
  return s;
}

// y_i - y at the operation's output type: float outputs subtract directly,
// integer outputs take the wrapped difference read as the nearest signed
// representative at the output width.
inline std::optional<double> output_delta(ScalarType out, uint64_t yi, uint64_t y) {
  if (out.is_float()) {
    double d = bits_to_f64(yi) - bits_to_f64(y);
    if (!std::isfinite(d)) return std::nullopt;
    return d;
  }
  return static_cast<double>(as_signed(yi - y, out.width));
}

inline std::optional<uint64_t> eval_sampled(Opcode op, ScalarType t,
                                            std::span<const SampleInput> x) {
  OpInput in[2];
  for (size_t k = 0; k < x.size(); ++k) in[k] = {x[k].bits, x[k].type};
  return eval_value_op(op, t, std::span<const OpInput>(in, x.size()));
}

}  // namespace detail

// Proximal directional derivative of one operation (full argmin form).
// Returns 0 when every input derivative is 0 or no usable sample differs
// in a cost-optimal way; otherwise (y_prox - y) / i_prox.
inline double prox_derivative(Opcode op, ScalarType t, std::span<const SampleInput> x,
                              std::span<const double> dx, int max_samples) {
  bool all_zero = true;
  for (double d : dx) all_zero &= (d == 0.0);
  if (all_zero) return 0.0;

  auto y0 = detail::eval_sampled(op, t, x);
  if (!y0) return 0.0;
  ScalarType out = result_type(op, t);

  double best_cost = std::numeric_limits<double>::infinity();
  double best_delta = 0.0;
  int best_step = 0;
  std::vector<detail::Shifted> shifted(x.size());
  std::vector<SampleInput> xi(x.begin(), x.end());

  for (int i = 1; i <= max_samples; ++i) {
    bool usable = true;
    bool moved = false;
    double dist2 = 0.0;
    for (size_t k = 0; k < x.size(); ++k) {
      shifted[k] = detail::shift_input(x[k], dx[k], i);
      usable &= shifted[k].usable;
      moved |= shifted[k].bits != x[k].bits;
      dist2 += shifted[k].offset * shifted[k].offset;
      xi[k].bits = shifted[k].bits;
    }
    if (!usable || !moved) continue;
    auto yi = detail::eval_sampled(op, t, xi);
    if (!yi) continue;  // a sample that traps is skipped, not fatal
    auto delta = detail::output_delta(out, *yi, *y0);
    if (!delta) continue;
    double cost = -std::fabs(*delta) + 0.5 * dist2;
    if (cost < best_cost) {
      best_cost = cost;
      best_delta = *delta;
      best_step = i;
    }
  }
  if (best_step == 0) return 0.0;
  return best_delta / static_cast<double>(best_step);
}

// Sampling shortcut: the derivative from the first sample whose output
// differs from the base output. Skips the same samples the full form skips.
inline double prox_derivative_fast(Opcode op, ScalarType t, std::span<const SampleInput> x,
                                   std::span<const double> dx, int max_samples) {
  bool all_zero = true;
  for (double d : dx) all_zero &= (d == 0.0);
  if (all_zero) return 0.0;

  auto y0 = detail::eval_sampled(op, t, x);
  if (!y0) return 0.0;
  ScalarType out = result_type(op, t);

  std::vector<SampleInput> xi(x.begin(), x.end());
  for (int i = 1; i <= max_samples; ++i) {
    bool usable = true;
    bool moved = false;
    for (size_t k = 0; k < x.size(); ++k) {
      auto s = detail::shift_input(x[k], dx[k], i);
      usable &= s.usable;
      moved |= s.bits != x[k].bits;
      xi[k].bits = s.bits;
    }
    if (!usable || !moved) continue;
    auto yi = detail::eval_sampled(op, t, xi);
    if (!yi) continue;
    auto delta = detail::output_delta(out, *yi, *y0);
    if (!delta || *delta == 0.0) continue;
    return *delta / static_cast<double>(i);
  }
  return 0.0;
}

// Ops with closed-form derivative rules: float arithmetic, int-to-float
// conversion, and integer add/sub/mul.
inline bool has_analytic_derivative(Opcode op) {
  switch (op) {
    case Opcode::fadd:
    case Opcode::fsub:
    case Opcode::fmul:
    case Opcode::fdiv:
    case Opcode::itof:
    case Opcode::add:
    case Opcode::sub:
    case Opcode::mul:
      return true;
    default:
      return false;
  }
}

// Analytic chain-rule derivative. `degenerate` is set when the rule hits an
// undefined point (division by zero, non-finite result); the derivative is
// then 0 rather than propagating a non-finite value.
inline double analytic_derivative(Opcode op, ScalarType t, std::span<const SampleInput> x,
                                  std::span<const double> dx, bool* degenerate = nullptr) {
  auto flag = [&] {
    if (degenerate) *degenerate = true;
  };
  auto sanitized = [&](double v) {
    if (!std::isfinite(v)) {
      flag();
      return 0.0;
    }
    return v;
  };
  switch (op) {
    case Opcode::fadd: return sanitized(dx[0] + dx[1]);
    case Opcode::fsub: return sanitized(dx[0] - dx[1]);
    case Opcode::fmul: {
      double a = detail::bits_to_f64(x[0].bits);
      double b = detail::bits_to_f64(x[1].bits);
      return sanitized(a * dx[1] + b * dx[0]);
    }
    case Opcode::fdiv: {
      double a = detail::bits_to_f64(x[0].bits);
      double b = detail::bits_to_f64(x[1].bits);
      if (b == 0.0) {
        flag();
        return 0.0;
      }
      return sanitized((dx[0] * b - a * dx[1]) / (b * b));
    }
    case Opcode::itof: return sanitized(dx[0]);
    case Opcode::add: return sanitized(dx[0] + dx[1]);
    case Opcode::sub: return sanitized(dx[0] - dx[1]);
    case Opcode::mul: {
      double a = static_cast<double>(as_signed(x[0].bits, t.width));
      double b = static_cast<double>(as_signed(x[1].bits, t.width));
      return sanitized(a * dx[1] + b * dx[0]);
    }
    default: return 0.0;
  }
}

// ---------------------------------------------------------------------------
// Brute-force oracle. Materializes every sample and scans for the exact
// argmin with the same tie-break. Its operation semantics are written out
// locally so the production evaluation path is not on its own checklist.

struct OpSample {
  int index = 0;                  // step count i in [1, N]
  std::vector<uint64_t> shifted;  // shifted input values
  std::optional<uint64_t> output; // nullopt when evaluation trapped
  double cost = 0.0;
  bool skipped = false;
};

namespace bruteforce {

inline uint64_t bmask(uint8_t w) { return w >= 64 ? ~0ull : ((1ull << w) - 1); }

inline int64_t bsign(uint64_t v, uint8_t w) {
  v &= bmask(w);
  if (w < 64 && (v >> (w - 1)) & 1) return static_cast<int64_t>(v | ~bmask(w));
  return static_cast<int64_t>(v);
}

inline std::optional<uint64_t> eval(Opcode op, ScalarType t,
                                    const std::vector<SampleInput>& x) {
  const uint8_t w = t.width;
  uint64_t a = x.empty() ? 0 : (x[0].bits & bmask(w));
  uint64_t b = x.size() < 2 ? 0 : (x[1].bits & bmask(w));
  int64_t sa = x.empty() ? 0 : bsign(x[0].bits, w);
  int64_t sb = x.size() < 2 ? 0 : bsign(x[1].bits, w);
  double fa = x.empty() ? 0 : std::bit_cast<double>(x[0].bits);
  double fb = x.size() < 2 ? 0 : std::bit_cast<double>(x[1].bits);

  switch (op) {
    case Opcode::add: return (a + b) & bmask(w);
    case Opcode::sub: return (a - b) & bmask(w);
    case Opcode::mul: return (a * b) & bmask(w);
    case Opcode::udiv: return b == 0 ? std::nullopt : std::optional<uint64_t>((a / b) & bmask(w));
    case Opcode::urem: return b == 0 ? std::nullopt : std::optional<uint64_t>((a % b) & bmask(w));
    case Opcode::sdiv:
      if (b == 0) return std::nullopt;
      if (sb == -1) return (uint64_t(0) - uint64_t(sa)) & bmask(w);
      return static_cast<uint64_t>(sa / sb) & bmask(w);
    case Opcode::srem:
      if (b == 0) return std::nullopt;
      if (sb == -1) return 0;
      return static_cast<uint64_t>(sa % sb) & bmask(w);
    case Opcode::shl: return b >= w ? 0 : (a << b) & bmask(w);
    case Opcode::lshr: return b >= w ? 0 : (a >> b) & bmask(w);
    case Opcode::ashr:
      if (b >= w) return sa < 0 ? bmask(w) : 0;
      return static_cast<uint64_t>(sa >> b) & bmask(w);
    case Opcode::band: return a & b;
    case Opcode::bor: return a | b;
    case Opcode::bxor: return a ^ b;
    case Opcode::icmp_eq: return a == b ? 1 : 0;
    case Opcode::icmp_ne: return a != b ? 1 : 0;
    case Opcode::icmp_ult: return a < b ? 1 : 0;
    case Opcode::icmp_ule: return a <= b ? 1 : 0;
    case Opcode::icmp_ugt: return a > b ? 1 : 0;
    case Opcode::icmp_slt: return sa < sb ? 1 : 0;
    case Opcode::icmp_sle: return sa <= sb ? 1 : 0;
    case Opcode::icmp_sgt: return sa > sb ? 1 : 0;
    case Opcode::zext: return (x[0].bits & bmask(x[0].type.width)) & bmask(w);
    case Opcode::sext:
      return static_cast<uint64_t>(bsign(x[0].bits, x[0].type.width)) & bmask(w);
    case Opcode::trunc: return x[0].bits & bmask(w);
    case Opcode::ftoi: {
      double d = fa;
      if (std::isnan(d)) return 0;
      double lo = -std::ldexp(1.0, w - 1), hi = std::ldexp(1.0, w - 1);
      if (d <= lo) return (1ull << (w - 1)) & bmask(w);
      if (d >= hi) return ((1ull << (w - 1)) - 1) & bmask(w);
      return static_cast<uint64_t>(static_cast<int64_t>(std::trunc(d))) & bmask(w);
    }
    case Opcode::itof:
      return std::bit_cast<uint64_t>(int_to_f64_trunc(bsign(x[0].bits, x[0].type.width)));
    case Opcode::fadd: return std::bit_cast<uint64_t>(fa + fb);
    case Opcode::fsub: return std::bit_cast<uint64_t>(fa - fb);
    case Opcode::fmul: return std::bit_cast<uint64_t>(fa * fb);
    case Opcode::fdiv: return std::bit_cast<uint64_t>(fa / fb);
    case Opcode::frem: return std::bit_cast<uint64_t>(std::fmod(fa, fb));
    default: return std::nullopt;
  }
}

}  // namespace bruteforce

inline std::vector<OpSample> brute_force_samples(Opcode op, ScalarType t,
                                                 std::span<const SampleInput> x,
                                                 std::span<const double> dx,
                                                 int max_samples) {
  std::vector<OpSample> out;
  std::vector<SampleInput> base(x.begin(), x.end());
  auto y0 = bruteforce::eval(op, t, base);
  ScalarType ot = result_type(op, t);

  for (int i = 1; i <= max_samples; ++i) {
    OpSample s;
    s.index = i;
    double dist2 = 0.0;
    bool moved = false;
    bool usable = true;
    std::vector<SampleInput> xi = base;
    for (size_t k = 0; k < base.size(); ++k) {
      double amount = dx[k] * i;
      if (base[k].type.is_float()) {
        double v = std::bit_cast<double>(base[k].bits) + amount;
        if (!std::isfinite(v)) usable = false;
        xi[k].bits = std::bit_cast<uint64_t>(v);
        dist2 += amount * amount;
      } else {
        if (!(std::fabs(amount) < 9.0e18)) amount = std::copysign(9.0e18, amount);
        int64_t off = std::llround(amount);
        xi[k].bits = (base[k].bits + static_cast<uint64_t>(off)) &
                     bruteforce::bmask(base[k].type.width);
        dist2 += static_cast<double>(off) * static_cast<double>(off);
      }
      moved |= xi[k].bits != base[k].bits;
    }
    for (auto& v : xi) s.shifted.push_back(v.bits);
    if (!usable || !moved || !y0) {
      s.skipped = true;
      out.push_back(std::move(s));
      continue;
    }
    s.output = bruteforce::eval(op, t, xi);
    if (!s.output) {
      s.skipped = true;
      out.push_back(std::move(s));
      continue;
    }
    double delta;
    if (ot.is_float()) {
      delta = std::bit_cast<double>(*s.output) - std::bit_cast<double>(*y0);
      if (!std::isfinite(delta)) {
        s.skipped = true;
        out.push_back(std::move(s));
        continue;
      }
    } else {
      delta = static_cast<double>(bruteforce::bsign(*s.output - *y0, ot.width));
    }
    s.cost = -std::fabs(delta) + 0.5 * dist2;
    out.push_back(std::move(s));
  }
  return out;
}

inline double brute_force_prox(Opcode op, ScalarType t, std::span<const SampleInput> x,
                               std::span<const double> dx, int max_samples) {
  bool all_zero = true;
  for (double d : dx) all_zero &= (d == 0.0);
  if (all_zero) return 0.0;

  std::vector<SampleInput> base(x.begin(), x.end());
  auto y0 = bruteforce::eval(op, t, base);
  if (!y0) return 0.0;
  ScalarType ot = result_type(op, t);

  auto samples = brute_force_samples(op, t, x, dx, max_samples);
  const OpSample* best = nullptr;
  for (const auto& s : samples) {
    if (s.skipped) continue;
    if (!best || s.cost < best->cost) best = &s;
  }
  if (!best) return 0.0;
  double delta;
  if (ot.is_float())
    delta = std::bit_cast<double>(*best->output) - std::bit_cast<double>(*y0);
  else
    delta = static_cast<double>(bruteforce::bsign(*best->output - *y0, ot.width));
  return delta / static_cast<double>(best->index);
}

}  // namespace pga
