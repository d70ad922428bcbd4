// orchestrator.hpp
//
// Banked push/pop memory turning the unified input stream (pixel-major,
// channel blocks innermost) into kernel-window vectors for the sparse engine.
//
// Layout, per row region: input pixel w of a row has phase f = w mod s and
// column j = w div s. Channel block cb of that pixel lives in
//   bank    (cb + j) mod P_Fx
//   address region * depth + (f * groups + j div P_Fx) * NCB + cb
// so one push word (P_Fx consecutive channel blocks of one pixel) writes every
// bank once, and one pop vector (the same window element for P_Fx adjacent
// output pixels) reads every bank at most once. The slot of bank b in a pop
// vector is (b - rot) mod P_Fx with rot = (cb + j0) mod P_Fx.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualsim/binary_engine.hpp"
#include "dualsim/bitmap.hpp"
#include "dualsim/config.hpp"
#include "dualsim/errors.hpp"

namespace dualsim {

// Dense spike tensor [t][h][w][c], one byte per spike.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t T, std::size_t H, std::size_t W, std::size_t C)
      : T_(T), H_(H), W_(W), C_(C), bits_(T * H * W * C, 0) {}

  std::size_t T() const noexcept { return T_; }
  std::size_t H() const noexcept { return H_; }
  std::size_t W() const noexcept { return W_; }
  std::size_t C() const noexcept { return C_; }

  bool at(std::size_t t, std::size_t h, std::size_t w, std::size_t c) const {
    return bits_.at(((t * H_ + h) * W_ + w) * C_ + c) != 0;
  }
  void set(std::size_t t, std::size_t h, std::size_t w, std::size_t c, bool v = true) {
    bits_.at(((t * H_ + h) * W_ + w) * C_ + c) = v;
  }

 private:
  std::size_t T_ = 0, H_ = 0, W_ = 0, C_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Control registers of one layer; fixed before the layer starts.
struct RegisterSpace {
  std::size_t P_Ts = 1, P_Fx = 1, P_Ci = 1;
  std::size_t T_s = 1, F_h = 1, F_w = 1, C_i = 1;
  std::size_t K_h = 1, K_w = 1, stride = 1, padding = 0;
  std::size_t out_h = 1, out_w = 1;
  std::size_t channel_blocks = 1;  // ceil(C_i / P_Ci)
  std::size_t padded_blocks = 1;   // channel_blocks rounded up to P_Fx
  std::size_t groups = 1;          // P_Fx-pixel groups per phase per row
  std::size_t depth = 1;           // words per bank per row region
  std::size_t regions = 2;         // row regions in the ring
  std::size_t accumulation = 1;    // K_h * K_w * channel_blocks per output
  bool attention = false;

  std::size_t word_bits() const noexcept { return P_Ts * P_Ci; }
  std::size_t vector_bits() const noexcept { return P_Fx * word_bits(); }
  std::size_t t_blocks() const noexcept { return (T_s + P_Ts - 1) / P_Ts; }
  std::size_t out_groups() const noexcept { return (out_w + P_Fx - 1) / P_Fx; }
  std::size_t stream_length() const noexcept {
    return t_blocks() * out_h * out_groups() * accumulation;
  }
  std::size_t push_words() const noexcept {
    return t_blocks() * F_h * F_w * padded_blocks / P_Fx;
  }

  static RegisterSpace for_layer(const LayerShape& l, const ParallelismConfig& cfg) {
    l.validate();
    if (cfg.P_Ts == 0 || cfg.P_Fx == 0 || cfg.P_Ci == 0)
      throw ConfigError("orchestrator needs P_Ts, P_Fx, P_Ci >= 1");
    RegisterSpace r;
    r.P_Ts = cfg.P_Ts;
    r.P_Fx = cfg.P_Fx;
    r.P_Ci = cfg.P_Ci;
    r.T_s = l.T_s;
    r.F_h = l.F_h;
    r.F_w = l.F_w;
    r.C_i = l.C_i;
    r.K_h = l.K_h;
    r.K_w = l.K_w;
    r.stride = l.stride;
    r.padding = l.padding;
    r.out_h = l.out_h();
    r.out_w = l.out_w();
    r.channel_blocks = (l.C_i + cfg.P_Ci - 1) / cfg.P_Ci;
    r.padded_blocks = (r.channel_blocks + cfg.P_Fx - 1) / cfg.P_Fx * cfg.P_Fx;
    const std::size_t cols = (l.F_w + l.stride - 1) / l.stride;
    r.groups = (cols + cfg.P_Fx - 1) / cfg.P_Fx;
    r.depth = l.stride * r.groups * r.padded_blocks;
    r.regions = l.K_h + 1;
    r.accumulation = l.K_h * l.K_w * r.channel_blocks;
    r.attention = l.kind == LayerKind::attention_proj;
    return r;
  }
};

// Bank word of pixel (t-block, h, w), channel block cb.
inline SpikeBitmap pixel_word(const FeatureMap& fm, const RegisterSpace& rs, std::size_t tb,
                              std::size_t h, std::size_t w, std::size_t cb) {
  SpikeBitmap b(rs.word_bits());
  for (std::size_t tt = 0; tt < rs.P_Ts; ++tt) {
    const std::size_t t = tb * rs.P_Ts + tt;
    if (t >= fm.T()) break;
    for (std::size_t i = 0; i < rs.P_Ci; ++i) {
      const std::size_t c = cb * rs.P_Ci + i;
      if (c < fm.C() && fm.at(t, h, w, c)) b.set(tt * rs.P_Ci + i);
    }
  }
  return b;
}

// Nested-loop oracle: (t-block, oh, og, k_h, k_w, cb), zero outside the map.
inline std::vector<SpikeBitmap> reference_im2col(const FeatureMap& fm, const LayerShape& l,
                                                 const ParallelismConfig& cfg) {
  const RegisterSpace rs = RegisterSpace::for_layer(l, cfg);
  std::vector<SpikeBitmap> out;
  out.reserve(rs.stream_length());
  for (std::size_t tb = 0; tb < rs.t_blocks(); ++tb)
    for (std::size_t oh = 0; oh < rs.out_h; ++oh)
      for (std::size_t og = 0; og < rs.out_groups(); ++og)
        for (std::size_t kh = 0; kh < rs.K_h; ++kh)
          for (std::size_t kw = 0; kw < rs.K_w; ++kw)
            for (std::size_t cb = 0; cb < rs.channel_blocks; ++cb) {
              SpikeBitmap v(rs.vector_bits());
              const auto ih = static_cast<std::ptrdiff_t>(oh * rs.stride + kh) -
                              static_cast<std::ptrdiff_t>(rs.padding);
              for (std::size_t p = 0; p < rs.P_Fx; ++p) {
                const std::size_t ow = og * rs.P_Fx + p;
                const auto iw = static_cast<std::ptrdiff_t>(ow * rs.stride + kw) -
                                static_cast<std::ptrdiff_t>(rs.padding);
                if (ow >= rs.out_w || ih < 0 || iw < 0 ||
                    ih >= static_cast<std::ptrdiff_t>(rs.F_h) ||
                    iw >= static_cast<std::ptrdiff_t>(rs.F_w))
                  continue;
                v.assign(p * rs.word_bits(),
                         pixel_word(fm, rs, tb, static_cast<std::size_t>(ih),
                                    static_cast<std::size_t>(iw), cb));
              }
              out.push_back(std::move(v));
            }
  return out;
}

struct PopTraceEntry {
  std::size_t cycle = 0;
  std::size_t k_h = 0, k_w = 0, cb = 0, group = 0;
  std::size_t rotation = 0;
  std::vector<std::optional<std::size_t>> bank_address;  // per bank, none if idle
};

struct OrchestratorReport {
  std::vector<SpikeBitmap> stream;
  std::size_t total_cycles = 0;
  std::size_t push_cycles = 0;
  std::size_t pop_cycles = 0;    // == stream.size()
  std::size_t fill_cycles = 0;   // before the first pop
  std::size_t starved_cycles = 0;  // pop idle waiting for input rows after the first pop
  std::size_t pop_stalls = 0;    // pop blocked by a bank port; zero by construction
  std::size_t port_checked_cycles = 0;
  std::vector<PopTraceEntry> trace;
};

class Orchestrator {
 public:
  Orchestrator(const LayerShape& l, const ParallelismConfig& cfg)
      : layer_(l), rs_(RegisterSpace::for_layer(l, cfg)),
        banks_(rs_.P_Fx, std::vector<SpikeBitmap>(rs_.regions * rs_.depth,
                                                  SpikeBitmap(rs_.word_bits()))),
        writes_(rs_.P_Fx), reads_(rs_.P_Fx) {}

  const RegisterSpace& registers() const noexcept { return rs_; }

  // Bank and address of (global row, pixel w, channel block cb).
  std::pair<std::size_t, std::size_t> locate(std::size_t row, std::size_t w,
                                             std::size_t cb) const {
    const std::size_t f = w % rs_.stride, j = w / rs_.stride;
    const std::size_t bank = (cb + j) % rs_.P_Fx;
    const std::size_t addr = (row % rs_.regions) * rs_.depth +
                             (f * rs_.groups + j / rs_.P_Fx) * rs_.padded_blocks + cb;
    return {bank, addr};
  }

  OrchestratorReport run(const FeatureMap& fm, bool trace = false) {
    if (fm.H() != rs_.F_h || fm.W() != rs_.F_w || fm.C() != rs_.C_i || fm.T() != rs_.T_s)
      throw ConfigError("feature map does not match layer '" + layer_.name + "'");
    OrchestratorReport rep;
    rep.stream.reserve(rs_.stream_length());

    const std::size_t rows_total = rs_.t_blocks() * rs_.F_h;
    const std::size_t words_per_row = rs_.F_w * rs_.padded_blocks / rs_.P_Fx;
    const std::size_t out_rows = rs_.t_blocks() * rs_.out_h;
    const std::size_t per_out_row = rs_.out_groups() * rs_.accumulation;

    std::size_t push_row = 0, push_word = 0;   // next word to push
    std::size_t out_row = 0, out_idx = 0;      // next vector to pop
    std::size_t cycle = 0;
    bool popped_any = false;

    while (out_row < out_rows) {
      writes_.begin_cycle(cycle);
      reads_.begin_cycle(cycle);
      ++rep.port_checked_cycles;

      // Pop: the current output row needs its window rows fully pushed.
      const auto [lo, hi] = rows_for(out_row);
      if (hi <= push_row || lo >= hi) {
        pop_one(out_row, out_idx, rep, trace, cycle);
        popped_any = true;
        if (++out_idx == per_out_row) out_idx = 0, ++out_row;
      } else if (popped_any) {
        ++rep.starved_cycles;
      } else {
        ++rep.fill_cycles;
      }

      // Push: the target region must no longer be needed by pop.
      if (push_row < rows_total && region_free(push_row, out_row)) {
        push_one(fm, push_row, push_word);
        ++rep.push_cycles;
        if (++push_word == words_per_row) push_word = 0, ++push_row;
      }
      ++cycle;
    }
    rep.total_cycles = cycle;
    rep.pop_cycles = rep.stream.size();
    return rep;
  }

 private:
  // Global input rows [lo, hi) that output row `orow` reads.
  std::pair<std::size_t, std::size_t> rows_for(std::size_t orow) const {
    const std::size_t tb = orow / rs_.out_h, oh = orow % rs_.out_h;
    const auto top = static_cast<std::ptrdiff_t>(oh * rs_.stride) -
                     static_cast<std::ptrdiff_t>(rs_.padding);
    const auto lo = std::max<std::ptrdiff_t>(0, top);
    const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(rs_.F_h),
                                             top + static_cast<std::ptrdiff_t>(rs_.K_h));
    if (hi <= lo) return {0, 0};
    return {tb * rs_.F_h + static_cast<std::size_t>(lo),
            tb * rs_.F_h + static_cast<std::size_t>(hi)};
  }

  // Row `row` may overwrite row - regions once no output row at or after
  // `next_out_row` still reads it.
  bool region_free(std::size_t row, std::size_t next_out_row) const {
    if (row < rs_.regions) return true;
    const std::size_t old = row - rs_.regions;
    for (std::size_t o = next_out_row; o < rs_.t_blocks() * rs_.out_h; ++o) {
      const auto [lo, hi] = rows_for(o);
      if (lo >= hi) continue;
      if (lo > old) break;
      if (old < hi) return false;
    }
    return true;
  }

  void push_one(const FeatureMap& fm, std::size_t row, std::size_t word) {
    const std::size_t per_pixel = rs_.padded_blocks / rs_.P_Fx;
    const std::size_t w = word / per_pixel;
    const std::size_t cb0 = (word % per_pixel) * rs_.P_Fx;
    const std::size_t tb = row / rs_.F_h, h = row % rs_.F_h;
    for (std::size_t k = 0; k < rs_.P_Fx; ++k) {
      const std::size_t cb = cb0 + k;
      const auto [bank, addr] = locate(row, w, cb);
      writes_.write(bank, addr);
      banks_[bank][addr] = cb < rs_.channel_blocks ? pixel_word(fm, rs_, tb, h, w, cb)
                                                   : SpikeBitmap(rs_.word_bits());
    }
  }

  void pop_one(std::size_t orow, std::size_t idx, OrchestratorReport& rep, bool trace,
               std::size_t cycle) {
    const std::size_t tb = orow / rs_.out_h, oh = orow % rs_.out_h;
    const std::size_t cb = idx % rs_.channel_blocks;
    const std::size_t kw = (idx / rs_.channel_blocks) % rs_.K_w;
    const std::size_t kh = (idx / (rs_.channel_blocks * rs_.K_w)) % rs_.K_h;
    const std::size_t og = idx / rs_.accumulation;

    const auto s = static_cast<std::ptrdiff_t>(rs_.stride);
    const auto off = static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(rs_.padding);
    const std::ptrdiff_t f = ((off % s) + s) % s;
    const std::ptrdiff_t shift = (off - f) / s;  // floor(off / s)
    const std::ptrdiff_t j0 = static_cast<std::ptrdiff_t>(og * rs_.P_Fx) + shift;
    const auto ih = static_cast<std::ptrdiff_t>(oh * rs_.stride + kh) -
                    static_cast<std::ptrdiff_t>(rs_.padding);
    const auto P = static_cast<std::ptrdiff_t>(rs_.P_Fx);
    const std::size_t rot =
        static_cast<std::size_t>(((static_cast<std::ptrdiff_t>(cb) + j0) % P + P) % P);

    PopTraceEntry te;
    if (trace) {
      te = PopTraceEntry{cycle, kh, kw, cb, og, rot, {}};
      te.bank_address.assign(rs_.P_Fx, std::nullopt);
    }
    std::vector<SpikeBitmap> word(rs_.P_Fx, SpikeBitmap(rs_.word_bits()));
    if (ih >= 0 && ih < static_cast<std::ptrdiff_t>(rs_.F_h)) {
      const std::size_t row = tb * rs_.F_h + static_cast<std::size_t>(ih);
      for (std::size_t b = 0; b < rs_.P_Fx; ++b) {
        const std::size_t p = (b + rs_.P_Fx - rot) % rs_.P_Fx;
        const std::size_t ow = og * rs_.P_Fx + p;
        const std::ptrdiff_t j = j0 + static_cast<std::ptrdiff_t>(p);
        const std::ptrdiff_t iw = j * s + f;
        if (ow >= rs_.out_w || j < 0 || iw >= static_cast<std::ptrdiff_t>(rs_.F_w)) continue;
        const auto [bank, addr] = locate(row, static_cast<std::size_t>(iw), cb);
        if (bank != b) throw std::logic_error("orchestrator bank rotation mismatch");
        reads_.read(bank, addr);
        word[p] = banks_[bank][addr];
        if (trace) te.bank_address[bank] = addr;
      }
    }
    SpikeBitmap v(rs_.vector_bits());
    for (std::size_t p = 0; p < rs_.P_Fx; ++p) v.assign(p * rs_.word_bits(), word[p]);
    rep.stream.push_back(std::move(v));
    if (trace) rep.trace.push_back(std::move(te));
  }

  LayerShape layer_;
  RegisterSpace rs_;
  std::vector<std::vector<SpikeBitmap>> banks_;
  PortChecker writes_, reads_;
};

inline OrchestratorReport pop_stream(const FeatureMap& fm, const LayerShape& l,
                                     const ParallelismConfig& cfg, bool trace = false) {
  Orchestrator o(l, cfg);
  return o.run(fm, trace);
}

}  // namespace dualsim
