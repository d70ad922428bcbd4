// binary_engine.hpp
//
// Binary attention engine: byte-granular transpose memory, AND-PopCount
// systolic array timing, and the integer reference for binary attention.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dualsim/bitmap.hpp"
#include "dualsim/config.hpp"
#include "dualsim/errors.hpp"
#include "dualsim/popcount.hpp"

namespace dualsim {

class PortViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Per-cycle single-port bookkeeping: at most one write address and one read
// address per bank per cycle.
class PortChecker {
 public:
  explicit PortChecker(std::size_t banks) : w_(banks, kNone), r_(banks, kNone) {}

  void begin_cycle(std::size_t cycle) {
    cycle_ = cycle;
    ++checked_;
    std::fill(w_.begin(), w_.end(), kNone);
    std::fill(r_.begin(), r_.end(), kNone);
  }
  void write(std::size_t bank, std::size_t addr) { claim(w_, bank, addr, "write"); }
  void read(std::size_t bank, std::size_t addr) { claim(r_, bank, addr, "read"); }
  std::size_t checked_cycles() const noexcept { return checked_; }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  void claim(std::vector<std::size_t>& port, std::size_t bank, std::size_t addr,
             const char* what) {
    if (bank >= port.size()) throw PortViolation("bank index out of range");
    if (port[bank] != kNone && port[bank] != addr)
      throw PortViolation(std::string("cycle ") + std::to_string(cycle_) + ": second " +
                          what + " address on bank " + std::to_string(bank));
    port[bank] = addr;
  }
  std::vector<std::size_t> w_, r_;
  std::size_t cycle_ = 0;
  std::size_t checked_ = 0;
};

// T_s banks x d addresses x L bytes. Element e[l][d'][t] is stored at
// bank t, address d', byte l.
class TransposeMemory {
 public:
  TransposeMemory(std::size_t L, std::size_t d, std::size_t T_s)
      : L_(L), d_(d), T_(T_s), data_(L * d * T_s, 0), ports_(T_s) {
    if (L == 0 || d == 0 || T_s == 0) throw ConfigError("transpose dims must be >= 1");
  }

  std::size_t banks() const noexcept { return T_; }
  std::size_t depth() const noexcept { return d_; }
  std::size_t bytes_per_word() const noexcept { return L_; }

  // One push cycle: the T_s elements e[l][d'][*] arrive together; each bank
  // takes one masked byte write.
  void push(std::size_t l, std::size_t dd, const std::vector<std::uint8_t>& word) {
    if (l >= L_ || dd >= d_ || word.size() != T_)
      throw ConfigError("push outside the configured geometry");
    ports_.begin_cycle(cycle_++);
    for (std::size_t t = 0; t < T_; ++t) {
      ports_.write(t, dd);
      data_[(t * d_ + dd) * L_ + l] = word[t];
    }
  }

  // One pop cycle: bank t, address d' yields its L bytes.
  std::vector<std::uint8_t> pop(std::size_t t, std::size_t dd) {
    if (t >= T_ || dd >= d_) throw ConfigError("pop outside the configured geometry");
    ports_.begin_cycle(cycle_++);
    ports_.read(t, dd);
    const auto* p = &data_[(t * d_ + dd) * L_];
    return {p, p + L_};
  }

  std::size_t cycles() const noexcept { return cycle_; }
  std::size_t checked_cycles() const noexcept { return ports_.checked_cycles(); }

 private:
  std::size_t L_, d_, T_;
  std::vector<std::uint8_t> data_;
  PortChecker ports_;
  std::size_t cycle_ = 0;
};

struct TransposeResult {
  std::vector<std::uint8_t> out;  // (T_s, d, L) order
  std::size_t push_cycles = 0;
  std::size_t pop_cycles = 0;
};

// in is in (L, d, T_s) order: in[(l * d + d') * T_s + t].
inline TransposeResult transpose_frame(const std::vector<std::uint8_t>& in, std::size_t L,
                                       std::size_t d, std::size_t T_s) {
  if (in.size() != L * d * T_s)
    throw ConfigError("frame of " + std::to_string(in.size()) + " bytes does not fit " +
                      std::to_string(L) + "x" + std::to_string(d) + "x" +
                      std::to_string(T_s));
  TransposeMemory mem(L, d, T_s);
  TransposeResult r;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t dd = 0; dd < d; ++dd) {
      const auto* p = &in[(l * d + dd) * T_s];
      mem.push(l, dd, std::vector<std::uint8_t>(p, p + T_s));
      ++r.push_cycles;
    }
  r.out.reserve(in.size());
  for (std::size_t t = 0; t < T_s; ++t)
    for (std::size_t dd = 0; dd < d; ++dd) {
      auto word = mem.pop(t, dd);
      r.out.insert(r.out.end(), word.begin(), word.end());
      ++r.pop_cycles;
    }
  return r;
}

inline std::vector<std::uint8_t> reference_transpose(const std::vector<std::uint8_t>& in,
                                                     std::size_t L, std::size_t d,
                                                     std::size_t T_s) {
  std::vector<std::uint8_t> out(in.size());
  for (std::size_t t = 0; t < T_s; ++t)
    for (std::size_t dd = 0; dd < d; ++dd)
      for (std::size_t l = 0; l < L; ++l)
        out[(t * d + dd) * L + l] = in.at((l * d + dd) * T_s + t);
  return out;
}

// Rows of a {0,1} matrix as bitmaps.
struct BinaryMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<SpikeBitmap> row;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), row(r, SpikeBitmap(c)) {}

  bool at(std::size_t i, std::size_t j) const { return row.at(i).test(j); }
  void set(std::size_t i, std::size_t j, bool v = true) { row.at(i).set(j, v); }
  bool operator==(const BinaryMatrix&) const = default;

  BinaryMatrix transposed() const {
    BinaryMatrix t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        if (at(i, j)) t.set(j, i);
    return t;
  }
};

// Fires iff the integer input reaches round(threshold * sqrt(scale)).
struct ThresholdNeuron {
  std::int64_t threshold = 1;
  std::size_t scale = 1;

  std::int64_t effective() const {
    return static_cast<std::int64_t>(
        std::llround(static_cast<double>(threshold) * std::sqrt(static_cast<double>(scale))));
  }
  bool fire(std::int64_t x) const { return x >= effective(); }
};

// S[i][j] = n(popcount(Q_i & K_j)).
inline BinaryMatrix binary_scores(const BinaryMatrix& Q, const BinaryMatrix& K,
                                  const ThresholdNeuron& n) {
  if (Q.cols != K.cols) throw ConfigError("Q and K widths disagree");
  BinaryMatrix S(Q.rows, K.rows);
  for (std::size_t i = 0; i < Q.rows; ++i)
    for (std::size_t j = 0; j < K.rows; ++j) {
      std::int64_t acc = 0;
      for (std::size_t c = 0; c < Q.cols; ++c) acc += Q.at(i, c) && K.at(j, c);
      if (n.fire(acc)) S.set(i, j);
    }
  return S;
}

// S = [Q K^T >= round(delta1 * sqrt(d))], O = [S V >= delta2].
inline BinaryMatrix binary_attention_reference(const BinaryMatrix& Q, const BinaryMatrix& K,
                                               const BinaryMatrix& V, std::int64_t delta1,
                                               std::int64_t delta2, std::size_t d) {
  if (Q.cols != K.cols || Q.rows != K.rows || V.rows != K.rows)
    throw ConfigError("attention operand shapes disagree");
  const BinaryMatrix S = binary_scores(Q, K, ThresholdNeuron{delta1, d});
  return binary_scores(S, V.transposed(), ThresholdNeuron{delta2, 1});
}

struct SystolicConfig {
  std::size_t P_Bm = 1, P_Bn = 1, P_Bk = 1;
  std::size_t P_b() const noexcept { return P_Bm * P_Bn * P_Bk; }

  static SystolicConfig from(const ParallelismConfig& c) { return {c.P_Bm, c.P_Bn, c.P_Bk}; }
};

inline std::size_t systolic_matmul_cycles(std::size_t m, std::size_t n, std::size_t k,
                                          const SystolicConfig& cfg) {
  auto cd = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
  return cd(m, cfg.P_Bm) * cd(n, cfg.P_Bn) * cd(k, cfg.P_Bk);
}

// Analytic attention cycles for one head over T_s timesteps.
inline std::size_t attention_cycles(std::size_t T_s, std::size_t L, std::size_t d,
                                    const SystolicConfig& cfg) {
  return T_s * (systolic_matmul_cycles(L, L, d, cfg) + systolic_matmul_cycles(L, d, L, cfg));
}

struct SystolicRun {
  std::vector<BinaryMatrix> outputs;  // one per timestep
  std::size_t cycles = 0;
};

namespace detail {

// Output-stationary tiled A * B^T, where both operands are given by rows.
// Every (tile, k-block) pass is one array cycle; each PE reduces its
// P_Bk-wide slice with an AND-PopCount network.
inline BinaryMatrix tiled_and_popcount(const BinaryMatrix& A, const BinaryMatrix& Bt,
                                       const SystolicConfig& cfg, const ThresholdNeuron& n,
                                       const CompressorNetwork& pc, std::size_t& cycles) {
  const std::size_t m = A.rows, nn = Bt.rows, k = A.cols;
  BinaryMatrix out(m, nn);
  std::vector<std::int64_t> acc(cfg.P_Bm * cfg.P_Bn);
  for (std::size_t i0 = 0; i0 < m; i0 += cfg.P_Bm)
    for (std::size_t j0 = 0; j0 < nn; j0 += cfg.P_Bn) {
      std::fill(acc.begin(), acc.end(), 0);
      for (std::size_t k0 = 0; k0 < k; k0 += cfg.P_Bk) {
        ++cycles;
        const std::size_t kw = std::min(cfg.P_Bk, k - k0);
        for (std::size_t i = i0; i < std::min(m, i0 + cfg.P_Bm); ++i)
          for (std::size_t j = j0; j < std::min(nn, j0 + cfg.P_Bn); ++j) {
            SpikeBitmap a(cfg.P_Bk), b(cfg.P_Bk);
            a.assign(0, A.row[i].slice(k0, kw));
            b.assign(0, Bt.row[j].slice(k0, kw));
            acc[(i - i0) * cfg.P_Bn + (j - j0)] +=
                static_cast<std::int64_t>(pc.evaluate(a, b));
          }
      }
      for (std::size_t i = i0; i < std::min(m, i0 + cfg.P_Bm); ++i)
        for (std::size_t j = j0; j < std::min(nn, j0 + cfg.P_Bn); ++j)
          if (n.fire(acc[(i - i0) * cfg.P_Bn + (j - j0)])) out.set(i, j);
    }
  return out;
}

}  // namespace detail

// Q, K, V: per timestep, L x d. V reaches the array transposed through the
// transpose memory.
inline SystolicRun simulate_systolic(const std::vector<BinaryMatrix>& Q,
                                     const std::vector<BinaryMatrix>& K,
                                     const std::vector<BinaryMatrix>& V,
                                     const SystolicConfig& cfg, const ThresholdNeuron& n1,
                                     const ThresholdNeuron& n2) {
  if (Q.size() != K.size() || Q.size() != V.size() || Q.empty())
    throw ConfigError("Q, K, V need the same non-zero number of timesteps");
  if (cfg.P_Bm == 0 || cfg.P_Bn == 0 || cfg.P_Bk == 0)
    throw ConfigError("systolic dims must be >= 1");
  const std::size_t T = Q.size(), L = Q[0].rows, d = Q[0].cols;
  for (std::size_t t = 0; t < T; ++t)
    if (Q[t].rows != L || K[t].rows != L || V[t].rows != L || Q[t].cols != d ||
        K[t].cols != d || V[t].cols != d)
      throw ConfigError("Q, K, V must all be L x d at every timestep");

  // V as bytes in (L, d, T_s) order, transposed to (T_s, d, L).
  std::vector<std::uint8_t> frame(L * d * T);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t t = 0; t < T; ++t) frame[(l * d + c) * T + t] = V[t].at(l, c);
  const auto vt = transpose_frame(frame, L, d, T).out;

  const auto pc = build_optimized_popcount(cfg.P_Bk);
  SystolicRun r;
  for (std::size_t t = 0; t < T; ++t) {
    const BinaryMatrix S = detail::tiled_and_popcount(Q[t], K[t], cfg, n1, pc, r.cycles);
    BinaryMatrix Vt(d, L);
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t l = 0; l < L; ++l)
        if (vt[(t * d + c) * L + l]) Vt.set(c, l);
    r.outputs.push_back(detail::tiled_and_popcount(S, Vt, cfg, n2, pc, r.cycles));
  }
  return r;
}

}  // namespace dualsim
