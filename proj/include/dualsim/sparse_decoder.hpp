// sparse_decoder.hpp
//
// Bit-exact model of the M-lane one-hot sparse decoder. Lane m marks the
// (m+1)-th lowest set bit of the pending bitmap using a carry chain per lane:
//
//   g[m][n]   = in[n] & c[m-1][n]        (c[-1][n] = 1)
//   out[m][n] = g[m][n] & ~c[m][n]
//   c[m][n+1] = g[m][n] | c[m][n]         (c[m][0] = 0)
//
// so c[m][n] is set once lane m has already fired below position n.

#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "dualsim/bitmap.hpp"

namespace dualsim {

struct DecoderState {
  SpikeBitmap pending;
  std::size_t tracker = 0;  // == popcount(pending) at cycle boundaries
  std::size_t cycle = 0;

  static DecoderState load(const SpikeBitmap& input) {
    return DecoderState{input, input.popcount(), 0};
  }
};

struct LaneOutputs {
  std::vector<SpikeBitmap> onehot;   // one per lane, popcount <= 1
  std::vector<std::size_t> indices;  // extracted positions, ascending
};

// Carry vectors c[m] (width + 1 bits each, bit n = c[m][n]) for one step.
inline std::vector<SpikeBitmap> decoder_carries(const SpikeBitmap& in,
                                                std::size_t lanes) {
  const std::size_t w = in.width();
  std::vector<SpikeBitmap> carry(lanes, SpikeBitmap(w + 1));
  for (std::size_t m = 0; m < lanes; ++m) {
    for (std::size_t n = 0; n < w; ++n) {
      const bool prev_lane = (m == 0) ? true : carry[m - 1].test(n);
      const bool g = in.test(n) && prev_lane;
      carry[m].set(n + 1, g || carry[m].test(n));
    }
  }
  return carry;
}

inline std::pair<LaneOutputs, DecoderState> decode_step(const DecoderState& s,
                                                        std::size_t lanes) {
  const std::size_t w = s.pending.width();
  const auto carry = decoder_carries(s.pending, lanes);
  LaneOutputs out;
  out.onehot.assign(lanes, SpikeBitmap(w));
  SpikeBitmap fired(w);
  for (std::size_t m = 0; m < lanes; ++m) {
    for (std::size_t n = 0; n < w; ++n) {
      const bool prev_lane = (m == 0) ? true : carry[m - 1].test(n);
      const bool g = s.pending.test(n) && prev_lane;
      if (g && !carry[m].test(n)) {
        out.onehot[m].set(n);
        fired.set(n);
        out.indices.push_back(n);
      }
    }
  }
  std::sort(out.indices.begin(), out.indices.end());

  DecoderState next = s;
  next.pending &= ~fired;
  next.tracker -= out.indices.size();
  next.cycle += 1;
  return {std::move(out), std::move(next)};
}

// Reference: ascending positions of all set bits, by direct scan.
inline std::vector<std::size_t> oracle_decode(const SpikeBitmap& b) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < b.width(); ++i)
    if (b.test(i)) pos.push_back(i);
  return pos;
}

struct DecodeTraceEntry {
  std::size_t cycle = 0;
  std::size_t input = 0;
  std::vector<std::size_t> positions;
};

struct DecodeStreamResult {
  std::size_t cycles = 0;
  std::vector<DecodeTraceEntry> trace;
};

// Decodes a stream of inputs back to back. The next input is loaded in the
// cycle where the tracker is <= M, so consecutive inputs leave no bubble; an
// all-zero input still occupies its load cycle.
inline DecodeStreamResult decode_stream(const std::vector<SpikeBitmap>& inputs,
                                        std::size_t lanes) {
  DecodeStreamResult r;
  std::size_t cycle = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    DecoderState s = DecoderState::load(inputs[k]);
    while (true) {
      const bool last = s.tracker <= lanes;
      auto [lo, next] = decode_step(s, lanes);
      r.trace.push_back(DecodeTraceEntry{cycle, k, std::move(lo.indices)});
      ++cycle;
      s = std::move(next);
      if (last) break;
    }
  }
  r.cycles = cycle;
  return r;
}

}  // namespace dualsim
