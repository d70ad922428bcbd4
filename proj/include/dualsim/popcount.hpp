// popcount.hpp
//
// Gate-level AND-PopCount networks: popcount(a & b) built either from an
// AND2 layer plus a full-adder tree (vanilla) or from LUT6-sized 6:2 and 6:3
// compressors (optimized). Both end in a ripple carry-propagate adder.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualsim/bitmap.hpp"

namespace dualsim {

enum class GateKind { AND2, HA, FA, C62, C63 };

inline const char* to_string(GateKind k) {
  switch (k) {
    case GateKind::AND2: return "AND2";
    case GateKind::HA: return "HA";
    case GateKind::FA: return "FA";
    case GateKind::C62: return "C62";
    case GateKind::C63: return "C63";
  }
  return "?";
}

// C62 counts set AND-pairs among its inputs (in[0]&in[1], in[2]&in[3], ...);
// every other counting gate sums its inputs. Output k has weight 2^k
// relative to the gate's input column.
struct Gate {
  GateKind kind = GateKind::AND2;
  std::vector<std::size_t> in;
  std::vector<std::size_t> out;
  std::size_t stage = 0;
  bool cpa = false;  // part of the final carry-propagate adder
};

struct CircuitCost {
  std::size_t lut6_count = 0;       // one LUT6 per gate output bit
  std::size_t lut6_gate_rule = 0;   // one LUT6 per AND2/HA/FA, 2 per C62, 3 per C63
  std::size_t depth = 0;            // stages before the carry-propagate adder
  std::size_t cpa_luts = 0;
};

class CompressorNetwork {
 public:
  explicit CompressorNetwork(std::size_t width) : width_(width), signals_(2 * width) {
    if (width == 0) throw std::invalid_argument("popcount width must be >= 1");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t signal_count() const noexcept { return signals_; }
  const std::vector<Gate>& gates() const noexcept { return gates_; }
  const std::vector<std::size_t>& outputs() const noexcept { return outputs_; }

  static std::size_t output_bits(std::size_t width) {
    return static_cast<std::size_t>(std::bit_width(width));
  }

  std::size_t add(GateKind kind, std::vector<std::size_t> in, std::size_t n_out,
                  std::size_t stage, bool cpa = false) {
    if (in.size() > 6) throw std::logic_error("gate exceeds LUT6 fan-in");
    for (auto s : in)
      if (s >= signals_) throw std::logic_error("gate input not yet defined");
    Gate g{kind, std::move(in), {}, stage, cpa};
    for (std::size_t k = 0; k < n_out; ++k) g.out.push_back(signals_++);
    gates_.push_back(std::move(g));
    return gates_.size() - 1;
  }

  void set_outputs(std::vector<std::size_t> outs) { outputs_ = std::move(outs); }

  CircuitCost cost() const {
    CircuitCost c;
    for (const auto& g : gates_) {
      c.lut6_count += g.out.size();
      if (g.cpa) c.cpa_luts += g.out.size();
      switch (g.kind) {
        case GateKind::AND2:
        case GateKind::HA:
        case GateKind::FA: c.lut6_gate_rule += 1; break;
        case GateKind::C62: c.lut6_gate_rule += 2; break;
        case GateKind::C63: c.lut6_gate_rule += 3; break;
      }
      if (!g.cpa) c.depth = std::max(c.depth, g.stage);
    }
    return c;
  }

  std::uint64_t evaluate(const SpikeBitmap& a, const SpikeBitmap& b) const {
    if (a.width() != width_ || b.width() != width_)
      throw std::invalid_argument("operand width " + std::to_string(a.width()) + "/" +
                                  std::to_string(b.width()) + " != network width " +
                                  std::to_string(width_));
    std::vector<std::uint8_t> v(signals_, 0);
    for (std::size_t i = 0; i < width_; ++i) {
      v[2 * i] = a.test(i);
      v[2 * i + 1] = b.test(i);
    }
    for (const auto& g : gates_) {
      unsigned n = 0;
      if (g.kind == GateKind::AND2 || g.kind == GateKind::C62) {
        for (std::size_t k = 0; k + 1 < g.in.size(); k += 2) n += v[g.in[k]] & v[g.in[k + 1]];
      } else {
        for (auto s : g.in) n += v[s];
      }
      for (std::size_t k = 0; k < g.out.size(); ++k) v[g.out[k]] = (n >> k) & 1U;
    }
    std::uint64_t r = 0;
    for (std::size_t k = 0; k < outputs_.size(); ++k)
      r |= static_cast<std::uint64_t>(v[outputs_[k]]) << k;
    return r;
  }

 private:
  std::size_t width_;
  std::size_t signals_;
  std::vector<Gate> gates_;
  std::vector<std::size_t> outputs_;
};

namespace detail {

using Columns = std::vector<std::vector<std::size_t>>;

inline void push_col(Columns& cols, std::size_t k, std::size_t s) {
  if (cols.size() <= k) cols.resize(k + 1);
  cols[k].push_back(s);
}

inline std::size_t max_height(const Columns& cols) {
  std::size_t h = 0;
  for (const auto& c : cols) h = std::max(h, c.size());
  return h;
}

// Ripple adder over columns of height <= 2, then bind network outputs.
inline void finish_with_cpa(CompressorNetwork& n, Columns cols, std::size_t stage) {
  const std::size_t bits = CompressorNetwork::output_bits(n.width());
  for (std::size_t k = bits; k < cols.size(); ++k)
    if (!cols[k].empty()) throw std::logic_error("bit above the popcount range");
  std::vector<std::size_t> outs;
  std::vector<std::size_t> carry;
  for (std::size_t k = 0; k < bits; ++k) {
    std::vector<std::size_t> col = k < cols.size() ? cols[k] : std::vector<std::size_t>{};
    col.insert(col.end(), carry.begin(), carry.end());
    carry.clear();
    if (col.empty()) throw std::logic_error("popcount output column is empty");
    if (col.size() == 1) {
      outs.push_back(col[0]);
      continue;
    }
    if (col.size() > 3) throw std::logic_error("carry-propagate column too tall");
    const bool last = k + 1 == bits;
    const GateKind kind = col.size() == 2 ? GateKind::HA : GateKind::FA;
    // The top column's carry is provably zero and is not built.
    const std::size_t gi = n.add(kind, col, last ? 1 : 2, stage, true);
    const auto& g = n.gates()[gi];
    outs.push_back(g.out[0]);
    if (!last) carry.push_back(g.out[1]);
  }
  n.set_outputs(std::move(outs));
}

}  // namespace detail

// AND2 per bit pair, then FA-only Wallace stages (groups of three per
// column, leftovers pass) until every column holds <= 2 bits.
inline CompressorNetwork build_vanilla_popcount(std::size_t width) {
  CompressorNetwork n(width);
  detail::Columns cols(1);
  for (std::size_t i = 0; i < width; ++i)
    cols[0].push_back(n.gates()[n.add(GateKind::AND2, {2 * i, 2 * i + 1}, 1, 1)].out[0]);
  std::size_t stage = 1;
  while (detail::max_height(cols) > 2) {
    ++stage;
    detail::Columns next;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto& col = cols[k];
      std::size_t i = 0;
      for (; i + 3 <= col.size(); i += 3) {
        const auto& g = n.gates()[n.add(GateKind::FA, {col[i], col[i + 1], col[i + 2]}, 2, stage)];
        detail::push_col(next, k, g.out[0]);
        detail::push_col(next, k + 1, g.out[1]);
      }
      for (; i < col.size(); ++i) detail::push_col(next, k, col[i]);
    }
    cols = std::move(next);
  }
  detail::finish_with_cpa(n, std::move(cols), stage + 1);
  return n;
}

// Stage 1: C62 per three AND-pairs (a lone pair is an AND2). Later stages:
// C63 over greedy groups of six equal-weight bits; leftovers pass through,
// except that a stage with no full group compresses the tallest column
// (3..5 bits) with one partial compressor so reduction always progresses.
inline CompressorNetwork build_optimized_popcount(std::size_t width) {
  CompressorNetwork n(width);
  detail::Columns cols(1);
  for (std::size_t i = 0; i < width; i += 3) {
    const std::size_t pairs = std::min<std::size_t>(3, width - i);
    std::vector<std::size_t> in;
    for (std::size_t p = 0; p < pairs; ++p) {
      in.push_back(2 * (i + p));
      in.push_back(2 * (i + p) + 1);
    }
    if (pairs == 1) {
      detail::push_col(cols, 0, n.gates()[n.add(GateKind::AND2, in, 1, 1)].out[0]);
    } else {
      const auto& g = n.gates()[n.add(GateKind::C62, in, 2, 1)];
      detail::push_col(cols, 0, g.out[0]);
      detail::push_col(cols, 1, g.out[1]);
    }
  }
  std::size_t stage = 1;
  while (detail::max_height(cols) > 2) {
    ++stage;
    detail::Columns next;
    bool any_full = false;
    for (const auto& col : cols) any_full = any_full || col.size() >= 6;
    std::size_t partial_col = cols.size();
    if (!any_full) {
      std::size_t best = 0;
      for (std::size_t k = 0; k < cols.size(); ++k)
        if (cols[k].size() > best) best = cols[k].size(), partial_col = k;
    }
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto& col = cols[k];
      std::size_t i = 0;
      auto compress = [&](std::size_t take) {
        std::vector<std::size_t> in(col.begin() + static_cast<std::ptrdiff_t>(i),
                                    col.begin() + static_cast<std::ptrdiff_t>(i + take));
        const std::size_t outs = static_cast<std::size_t>(std::bit_width(take));
        const auto& g = n.gates()[n.add(GateKind::C63, std::move(in), outs, stage)];
        for (std::size_t o = 0; o < outs; ++o) detail::push_col(next, k + o, g.out[o]);
        i += take;
      };
      while (i + 6 <= col.size()) compress(6);
      if (k == partial_col) compress(col.size() - i);
      for (; i < col.size(); ++i) detail::push_col(next, k, col[i]);
    }
    cols = std::move(next);
  }
  detail::finish_with_cpa(n, std::move(cols), stage + 1);
  return n;
}

inline std::uint64_t evaluate_network(const CompressorNetwork& n, const SpikeBitmap& a,
                                      const SpikeBitmap& b) {
  return n.evaluate(a, b);
}

}  // namespace dualsim
