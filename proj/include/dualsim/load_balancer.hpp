// load_balancer.hpp
//
// Cycle-level models of the sparse engine's weight delivery:
//
//  * simulate_unified: one wide weight bank broadcasts chunks in order to every
//    grid point; each grid point hands non-zero chunks to any idle worker of
//    its P_Wo workers (out-of-order across the window). A chunk costs
//    ceil(popcount / M) worker cycles. The broadcast is all-or-nothing: it
//    stalls globally while any grid point lacks an idle worker.
//
//  * simulate_crossbar: B_m single-port banks behind an all-to-all crossbar.
//    Each PE (one per grid point) requests its next non-zero chunk; a bank
//    serves one address per cycle and every PE asking for that same address
//    is served together. Priority rotates round-robin every cycle. PEs hold no
//    buffered chunk.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "dualsim/config.hpp"
#include "dualsim/errors.hpp"
#include "dualsim/sim_result.hpp"
#include "dualsim/workload.hpp"

namespace dualsim {

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

struct UnifiedOptions {
  // Chunks one bank read can deliver; >1 models a bank widened to match the
  // aggregate bandwidth of a B_m-bank crossbar. A wide read may advance by
  // fewer chunks when some grid point cannot take them all.
  std::size_t chunks_per_word = 1;
  // Extra input-buffer entries per grid point in front of its workers. Zero
  // means a chunk is accepted only by an idle worker.
  std::size_t fifo_depth = 0;
  bool trace = false;
};

inline SimResult simulate_unified(const GridWorkload& w,
                                  const ParallelismConfig& cfg,
                                  UnifiedOptions opt = {}) {
  if (cfg.P_Wo == 0 || cfg.M == 0) throw ConfigError("P_Wo and M must be >= 1");
  if (opt.chunks_per_word == 0) throw ConfigError("chunks_per_word must be >= 1");
  const std::size_t grid = w.grid_points();
  const std::size_t chunks = w.chunk_count();
  const std::size_t workers = cfg.P_Wo;
  const std::size_t k = opt.chunks_per_word;

  // free_at[g * workers + i]: first cycle worker i of grid g is idle.
  std::vector<std::size_t> free_at(grid * workers, 0);
  // Start cycles of buffered chunks per grid point, non-decreasing.
  std::vector<std::deque<std::size_t>> queued(grid);
  std::vector<std::size_t> busy(grid, 0);
  SimResult r;
  std::size_t next = 0, t = 0, finish = 0;

  while (next < chunks) {
    const std::size_t end = std::min(chunks, next + k);
    std::size_t advance = end - next;
    for (std::size_t g = 0; g < grid && advance > 0; ++g) {
      auto& q = queued[g];
      while (!q.empty() && q.front() <= t) q.pop_front();
      std::size_t cap = opt.fifo_depth - q.size();
      for (std::size_t i = 0; i < workers; ++i) cap += free_at[g * workers + i] <= t;
      std::size_t j = 0;
      for (std::size_t c = next; c < next + advance; ++c, ++j) {
        if (w.popcount(g, c) == 0) continue;
        if (cap == 0) break;
        --cap;
      }
      advance = std::min(advance, j);
    }
    if (advance == 0) {
      ++r.stalls;
      if (opt.trace) r.trace.push_back({t, "stall"});
      ++t;
      continue;
    }
    for (std::size_t g = 0; g < grid; ++g) {
      auto* slot = &free_at[g * workers];
      for (std::size_t c = next; c < next + advance; ++c) {
        const std::size_t pc = w.popcount(g, c);
        if (pc == 0) continue;
        auto* wk = std::min_element(slot, slot + workers);
        const std::size_t start = std::max(t, *wk);
        const std::size_t cost = ceil_div(pc, cfg.M);
        if (start > t) queued[g].push_back(start);
        *wk = start + cost;
        busy[g] += cost;
        finish = std::max(finish, *wk);
      }
    }
    if (opt.trace)
      r.trace.push_back({t, "broadcast " + std::to_string(next) + ".." +
                                std::to_string(next + advance - 1)});
    next += advance;
    ++t;
  }
  r.D = std::max(t, finish);
  for (std::size_t g = 0; g < grid; ++g) {
    r.busy_cycles += busy[g];
    r.per_unit_busy.push_back(
        r.D == 0 ? 0.0
                 : static_cast<double>(busy[g]) /
                       static_cast<double>(r.D * workers));
  }
  return r;
}

struct CrossbarModel {
  std::size_t B_m = 1;
  std::size_t W = 16;              // bits per bank word = one chunk
  std::size_t pe_throughput = 4;   // spikes per cycle per PE

  // Bank and address holding chunk c.
  std::size_t bank_of(std::size_t c) const noexcept { return c % B_m; }
  std::size_t address_of(std::size_t c) const noexcept { return c / B_m; }

  static CrossbarModel matched(const ParallelismConfig& cfg, std::size_t banks) {
    return CrossbarModel{banks, cfg.P_Ci, cfg.G()};
  }
};

inline SimResult simulate_crossbar(const GridWorkload& w,
                                   const CrossbarModel& model,
                                   bool trace = false) {
  if (model.B_m == 0 || model.pe_throughput == 0)
    throw ConfigError("crossbar needs B_m >= 1 and pe_throughput >= 1");
  if (model.W != w.chunk_width())
    throw ConfigError("crossbar bank width must equal the chunk width");
  const std::size_t pes = w.grid_points();
  const std::size_t chunks = w.chunk_count();

  // Non-zero chunk lists per PE; zero chunks are skipped by the PE's bitmap scan.
  std::vector<std::vector<std::size_t>> todo(pes);
  for (std::size_t p = 0; p < pes; ++p)
    for (std::size_t c = 0; c < chunks; ++c)
      if (w.popcount(p, c) != 0) todo[p].push_back(c);

  std::vector<std::size_t> ptr(pes, 0), busy_until(pes, 0), busy(pes, 0);
  std::vector<std::size_t> chosen(model.B_m);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  SimResult r;
  std::size_t t = 0, remaining = 0;
  for (std::size_t p = 0; p < pes; ++p) remaining += !todo[p].empty();

  while (remaining > 0) {
    std::fill(chosen.begin(), chosen.end(), kNone);
    bool any = false;
    const std::size_t rr = t % pes;
    for (std::size_t k = 0; k < pes; ++k) {
      const std::size_t p = (rr + k) % pes;
      if (ptr[p] >= todo[p].size() || busy_until[p] > t) continue;
      any = true;
      const std::size_t c = todo[p][ptr[p]];
      auto& slot = chosen[model.bank_of(c)];
      if (slot == kNone) slot = model.address_of(c);
    }
    if (!any) {
      std::size_t wake = kNone;
      for (std::size_t p = 0; p < pes; ++p)
        if (ptr[p] < todo[p].size()) wake = std::min(wake, busy_until[p]);
      t = wake;
      continue;
    }
    for (std::size_t p = 0; p < pes; ++p) {
      if (ptr[p] >= todo[p].size() || busy_until[p] > t) continue;
      const std::size_t c = todo[p][ptr[p]];
      if (chosen[model.bank_of(c)] != model.address_of(c)) {
        ++r.stalls;
        continue;
      }
      const std::size_t cost = ceil_div(w.popcount(p, c), model.pe_throughput);
      busy_until[p] = t + cost;
      busy[p] += cost;
      if (trace)
        r.trace.push_back({t, "pe " + std::to_string(p) + " <- chunk " +
                                  std::to_string(c)});
      if (++ptr[p] == todo[p].size()) --remaining;
    }
    ++t;
  }
  r.D = 0;
  for (std::size_t p = 0; p < pes; ++p) r.D = std::max(r.D, busy_until[p]);
  for (std::size_t p = 0; p < pes; ++p) {
    r.busy_cycles += busy[p];
    r.per_unit_busy.push_back(
        r.D == 0 ? 0.0 : static_cast<double>(busy[p]) / static_cast<double>(r.D));
  }
  return r;
}

// Unified width must equal the crossbar's aggregate width in paired runs.
inline void check_bandwidth_parity(std::size_t unified_width_bits,
                                   const CrossbarModel& model) {
  if (unified_width_bits != model.B_m * model.W)
    throw ConfigError("bandwidth mismatch: unified bank is " +
                      std::to_string(unified_width_bits) + " bits, crossbar is " +
                      std::to_string(model.B_m) + " x " + std::to_string(model.W) +
                      " bits");
}

struct PairedResult {
  SimResult unified;
  SimResult crossbar;
  std::size_t unified_width_bits = 0;
};

// Same workload through both designs at equal total bank bandwidth: the
// unified bank is widened to B_m chunks per read.
inline PairedResult simulate_paired(const GridWorkload& w,
                                    const ParallelismConfig& cfg,
                                    const CrossbarModel& model) {
  PairedResult out;
  out.unified_width_bits = model.B_m * w.chunk_width();
  check_bandwidth_parity(out.unified_width_bits, model);
  out.unified = simulate_unified(w, cfg, UnifiedOptions{model.B_m, 0, false});
  out.crossbar = simulate_crossbar(w, model);
  return out;
}

struct StabilityStats {
  double std_over_max = 0.0;
  double mean_popcount = 0.0;
  double std_popcount = 0.0;
};

// Spread of per-grid-point window popcounts relative to the window size.
// `window_bits` defaults to chunk_count * chunk_width.
inline StabilityStats sparsity_stability(const GridWorkload& w,
                                         std::size_t window_bits = 0) {
  if (w.grid_points() < 2)
    throw ConfigError("sparsity_stability needs at least two grid points");
  if (window_bits == 0) window_bits = w.chunk_count() * w.chunk_width();
  const auto n = static_cast<double>(w.grid_points());
  double sum = 0.0, sq = 0.0;
  for (std::size_t g = 0; g < w.grid_points(); ++g) {
    const auto v = static_cast<double>(w.grid_popcount(g));
    sum += v;
    sq += v * v;
  }
  StabilityStats s;
  s.mean_popcount = sum / n;
  s.std_popcount = std::sqrt(std::max(0.0, sq / n - s.mean_popcount * s.mean_popcount));
  s.std_over_max = s.std_popcount / static_cast<double>(window_bits);
  return s;
}

}  // namespace dualsim
