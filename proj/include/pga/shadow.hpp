#pragma once

// Label allocator, gradient table, and per-byte shadow memory. A label is a
// 16-bit id keying a pair of chained derivatives (one per source direction);
// label 0 is reserved for the zero pair and is never allocated.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pga {

struct DerivPair {
  double pos = 0.0;  // chained derivative seeded from the +1 source direction
  double neg = 0.0;  // seeded from the -1 direction

  bool is_zero() const { return pos == 0.0 && neg == 0.0; }
  double magnitude() const { return std::max(std::fabs(pos), std::fabs(neg)); }
  bool operator==(const DerivPair&) const = default;
};

using Label = uint16_t;
inline constexpr Label kZeroLabel = 0;
inline constexpr uint32_t kLabelLimit = 65536;

struct LabelExhausted : std::runtime_error {
  std::string site;  // "<block>:<instruction index>" where allocation failed
  explicit LabelExhausted(std::string where)
      : std::runtime_error("label space exhausted at " + where), site(std::move(where)) {}
};

class GradientTable {
 public:
  GradientTable() : entries_(1) {}

  DerivPair lookup(Label l) const { return entries_[l]; }
  uint32_t allocated() const { return static_cast<uint32_t>(entries_.size()) - 1; }

  // Maps a derivative pair to a label. The zero pair is label 0; a pair equal
  // to one of the operation's input pairs reuses that input's label, so
  // derivative-preserving chains do not grow the table.
  Label intern(const DerivPair& d, std::span<const Label> inputs, const std::string& site) {
    if (d.is_zero()) return kZeroLabel;
    for (Label l : inputs)
      if (l != kZeroLabel && entries_[l] == d) return l;
    if (entries_.size() >= kLabelLimit) throw LabelExhausted(site);
    entries_.push_back(d);
    return static_cast<Label>(entries_.size() - 1);
  }

 private:
  std::vector<DerivPair> entries_;
};

class ShadowMemory {
 public:
  ShadowMemory(size_t memory_bytes, size_t num_regs)
      : bytes_(memory_bytes, kZeroLabel), regs_(num_regs, kZeroLabel) {}

  Label reg(uint32_t r) const { return regs_[r]; }
  void set_reg(uint32_t r, Label l) { regs_[r] = l; }
  Label byte(size_t addr) const { return bytes_[addr]; }

  void store(size_t addr, size_t width, Label l) {
    check(addr, width);
    for (size_t k = 0; k < width; ++k) bytes_[addr + k] = l;
  }

  // One label for a multi-byte load: if all bytes agree, that label;
  // otherwise the label with the largest derivative magnitude (ties go to
  // the lowest byte offset).
  Label load(const GradientTable& t, size_t addr, size_t width) const {
    check(addr, width);
    Label best = bytes_[addr];
    bool uniform = true;
    double best_mag = t.lookup(best).magnitude();
    for (size_t k = 1; k < width; ++k) {
      Label l = bytes_[addr + k];
      if (l != best) uniform = false;
      double mag = t.lookup(l).magnitude();
      if (mag > best_mag) {
        best = l;
        best_mag = mag;
      }
    }
    return uniform ? bytes_[addr] : best;
  }

  void clear(size_t addr, size_t len) {
    check(addr, len);
    for (size_t k = 0; k < len; ++k) bytes_[addr + k] = kZeroLabel;
  }

  void copy(size_t dst, size_t src, size_t len) {
    check(dst, len);
    check(src, len);
    if (dst == src || len == 0) return;
    if (dst < src)
      for (size_t k = 0; k < len; ++k) bytes_[dst + k] = bytes_[src + k];
    else
      for (size_t k = len; k-- > 0;) bytes_[dst + k] = bytes_[src + k];
  }

 private:
  void check(size_t addr, size_t len) const {
    if (addr + len > bytes_.size() || addr + len < addr)
      throw std::out_of_range("shadow access out of bounds");
  }

  std::vector<Label> bytes_;
  std::vector<Label> regs_;
};

}  // namespace pga
