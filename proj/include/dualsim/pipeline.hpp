// pipeline.hpp
//
// Workload balance between the sparse and binary engines, the per-head
// latency-hiding schedule, and a whole-network cycle report.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualsim/binary_engine.hpp"
#include "dualsim/config.hpp"
#include "dualsim/errors.hpp"
#include "dualsim/load_balancer.hpp"
#include "dualsim/orchestrator.hpp"
#include "dualsim/workload.hpp"

namespace dualsim {

struct Workloads {
  std::uint64_t W_s = 0, W_b = 0, P_s = 0, P_b = 0;
};

// W_s = T_s F_h F_w C_i P_Co; W_b = T_s (F_h F_w)^2 P_Co for attention layers.
inline Workloads compute_workloads(const LayerShape& l, const ParallelismConfig& cfg) {
  Workloads w;
  const std::uint64_t pix = static_cast<std::uint64_t>(l.F_h) * l.F_w;
  w.W_s = static_cast<std::uint64_t>(l.T_s) * pix * l.C_i * cfg.P_Co;
  w.W_b = l.kind == LayerKind::attention_proj
              ? static_cast<std::uint64_t>(l.T_s) * pix * pix * cfg.P_Co
              : 0;
  w.P_s = cfg.P_s();
  w.P_b = cfg.P_b();
  return w;
}

struct PbChoice {
  double target = 0.0;
  std::size_t P_Bm = 1, P_Bn = 1, P_Bk = 1;
  std::size_t P_b() const noexcept { return P_Bm * P_Bn * P_Bk; }
};

// Smallest legal P_Bm x P_Bn x P_Bk at or above 2/3 (F_h F_w / C_i) P_s.
// P_Bm, P_Bn are powers of two in [1, 64] with P_Bn <= P_Bm <= 2 P_Bn;
// P_Bk is in [1, 128]. Ties go to the smaller array.
inline PbChoice required_pb(const LayerShape& l, std::size_t P_s) {
  if (l.C_i == 0) throw ConfigError("required_pb needs C_i > 0");
  PbChoice best;
  best.target = 2.0 / 3.0 * static_cast<double>(l.F_h * l.F_w) /
                static_cast<double>(l.C_i) * static_cast<double>(P_s);
  std::size_t best_pb = std::numeric_limits<std::size_t>::max();
  for (std::size_t m = 1; m <= 64; m *= 2)
    for (std::size_t n = std::max<std::size_t>(1, m / 2); n <= m; n *= 2) {
      const double k_need = best.target / static_cast<double>(m * n);
      std::size_t k = static_cast<std::size_t>(std::ceil(k_need - 1e-9));
      k = std::max<std::size_t>(k, 1);
      if (k > 128) continue;
      const std::size_t pb = m * n * k;
      if (pb < best_pb || (pb == best_pb && m * n < best.P_Bm * best.P_Bn)) {
        best_pb = pb;
        best.P_Bm = m;
        best.P_Bn = n;
        best.P_Bk = k;
      }
    }
  if (best_pb == std::numeric_limits<std::size_t>::max())
    throw ConfigError("no legal binary-engine factorization reaches the target");
  return best;
}

enum class Engine { sparse, binary };
enum class HeadOp { Q, K, V, S, O };

inline const char* to_string(HeadOp op) {
  switch (op) {
    case HeadOp::Q: return "Q";
    case HeadOp::K: return "K";
    case HeadOp::V: return "V";
    case HeadOp::S: return "QK^T";
    case HeadOp::O: return "QK^TV";
  }
  return "?";
}

struct ScheduleEntry {
  Engine engine = Engine::sparse;
  HeadOp op = HeadOp::Q;
  std::size_t head = 0;
  std::uint64_t start = 0, end = 0;
};

struct Schedule {
  std::vector<ScheduleEntry> entries;
  std::uint64_t total_cycles = 0;
  std::uint64_t sparse_cycles = 0;
  std::uint64_t binary_cycles = 0;
  std::uint64_t exposed_binary_cycles = 0;

  double utilization_sparse() const {
    return total_cycles == 0 ? 0.0
                             : static_cast<double>(sparse_cycles) / static_cast<double>(total_cycles);
  }
};

using LatencyFn = std::function<std::uint64_t(HeadOp, std::size_t head)>;

// Sparse engine: Q0 K0 V0 Q1 ... back to back. Binary engine in order
// S0 O0 S1 O1 ..., each at max(engine free, dependencies done).
inline Schedule schedule_heads(std::size_t heads, const LatencyFn& sparse_latency,
                               const LatencyFn& binary_latency) {
  Schedule s;
  std::vector<std::uint64_t> k_done(heads), v_done(heads);
  std::uint64_t t = 0;
  for (std::size_t h = 0; h < heads; ++h)
    for (HeadOp op : {HeadOp::Q, HeadOp::K, HeadOp::V}) {
      const std::uint64_t d = sparse_latency(op, h);
      s.entries.push_back({Engine::sparse, op, h, t, t + d});
      t += d;
      s.sparse_cycles += d;
      if (op == HeadOp::K) k_done[h] = t;
      if (op == HeadOp::V) v_done[h] = t;
    }
  std::uint64_t bfree = 0, end = t;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::uint64_t ds = binary_latency(HeadOp::S, h);
    const std::uint64_t s0 = std::max(bfree, k_done[h]);
    s.entries.push_back({Engine::binary, HeadOp::S, h, s0, s0 + ds});
    const std::uint64_t dout = binary_latency(HeadOp::O, h);
    const std::uint64_t o0 = std::max(s0 + ds, v_done[h]);
    s.entries.push_back({Engine::binary, HeadOp::O, h, o0, o0 + dout});
    bfree = o0 + dout;
    s.binary_cycles += ds + dout;
    if (ds + dout > 0) end = std::max(end, bfree);
  }
  s.total_cycles = end;
  s.exposed_binary_cycles = end - s.sparse_cycles;
  return s;
}

// Dependency and exclusivity check; throws on violation.
inline void check_schedule(const Schedule& s) {
  for (const auto& e : s.entries) {
    if (e.end < e.start) throw std::logic_error("schedule entry ends before it starts");
    for (const auto& o : s.entries) {
      if (&o == &e) continue;
      if (o.engine == e.engine && o.start < e.end && e.start < o.end && o.end > o.start &&
          e.end > e.start)
        throw std::logic_error("overlapping entries on one engine");
      if (o.head != e.head) continue;
      const bool dep = (e.op == HeadOp::S && (o.op == HeadOp::Q || o.op == HeadOp::K)) ||
                       (e.op == HeadOp::O && (o.op == HeadOp::S || o.op == HeadOp::V));
      if (dep && e.start < o.end) throw std::logic_error("dependency violated");
    }
  }
}

struct EndToEndOptions {
  std::size_t max_sampled_tiles = 4;  // tiles simulated per layer; the rest extrapolated
  std::size_t fill_cycles = 0;        // per-layer pipeline fill constant
};

struct LayerReport {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::uint64_t orchestrator_cycles = 0;
  std::uint64_t sparse_cycles = 0;
  std::uint64_t binary_cycles = 0;
  std::uint64_t exposed_binary_cycles = 0;
  std::uint64_t total_cycles = 0;
};

struct NetworkReport {
  std::vector<LayerReport> layers;
  std::vector<Schedule> attention;  // one per attention block
  std::uint64_t total_cycles = 0;
};

// Sparse-engine cycles for a whole layer: every tile of P_Ts x P_Fx output
// positions runs once per group of P_Co output channels.
inline std::uint64_t sparse_layer_cycles(const LayerShape& l, const SparsityModel& model,
                                         std::size_t layer_index, const ParallelismConfig& cfg,
                                         std::size_t max_sampled_tiles,
                                         std::size_t out_channels) {
  const RegisterSpace rs = RegisterSpace::for_layer(l, cfg);
  const std::uint64_t tiles = static_cast<std::uint64_t>(rs.t_blocks()) * rs.out_h *
                              rs.out_groups();
  const std::uint64_t passes = (out_channels + cfg.P_Co - 1) / cfg.P_Co;
  const std::size_t sampled =
      static_cast<std::size_t>(std::min<std::uint64_t>(tiles, std::max<std::size_t>(1, max_sampled_tiles)));
  std::uint64_t sum = 0;
  for (std::size_t k = 0; k < sampled; ++k) {
    const auto w = make_grid_workload(l, model, layer_index, cfg, k);
    sum += simulate_unified(w, cfg).D;
  }
  const std::uint64_t per_tile = (sum + sampled - 1) / sampled;
  return per_tile * tiles * passes;
}

inline NetworkReport end_to_end(const NetworkConfig& net, const ParallelismConfig& cfg,
                                const SparsityModel& sparsity, EndToEndOptions opt = {}) {
  cfg.validate();
  NetworkReport rep;
  std::size_t compute_index = 0;
  std::vector<std::size_t> compute_idx(net.layers.size(), 0);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    compute_idx[i] = compute_index;
    if (net.layers[i].is_compute()) ++compute_index;
  }
  const SystolicConfig sys = SystolicConfig::from(cfg);

  std::size_t i = 0;
  while (i < net.layers.size()) {
    const LayerShape& l = net.layers[i];
    if (!l.is_compute()) {
      rep.layers.push_back({l.name, l.kind, 0, 0, 0, 0, 0});
      ++i;
      continue;
    }
    if (l.kind == LayerKind::attention_proj && l.role == ProjRole::query) {
      const AttentionBlock& b = net.attention_blocks.at(*l.block);
      // Q, K, V projections, one head (d output channels) per job.
      std::uint64_t per_head[3];
      for (std::size_t r = 0; r < 3; ++r) {
        const LayerShape& pl = net.layers.at(i + r);
        per_head[r] = sparse_layer_cycles(pl, sparsity, compute_idx[i + r], cfg,
                                          opt.max_sampled_tiles, b.head_dim);
      }
      const std::uint64_t attn = attention_cycles(l.T_s, b.seq_len, b.head_dim, sys);
      const std::uint64_t s_part = static_cast<std::uint64_t>(l.T_s) *
                                   systolic_matmul_cycles(b.seq_len, b.seq_len, b.head_dim, sys);
      Schedule s = schedule_heads(
          b.heads,
          [&](HeadOp op, std::size_t) {
            return per_head[op == HeadOp::Q ? 0 : op == HeadOp::K ? 1 : 2];
          },
          [&](HeadOp op, std::size_t) { return op == HeadOp::S ? s_part : attn - s_part; });
      for (std::size_t r = 0; r < 3; ++r) {
        const LayerShape& pl = net.layers[i + r];
        LayerReport lr{pl.name, pl.kind, 0, per_head[r] * b.heads, 0, 0, 0};
        lr.orchestrator_cycles = RegisterSpace::for_layer(pl, cfg).stream_length() *
                                 ((pl.C_o + cfg.P_Co - 1) / cfg.P_Co);
        if (r == 2) {
          lr.binary_cycles = s.binary_cycles;
          lr.exposed_binary_cycles = s.exposed_binary_cycles;
        }
        lr.total_cycles = std::max(lr.orchestrator_cycles, lr.sparse_cycles) +
                          lr.exposed_binary_cycles + opt.fill_cycles;
        rep.layers.push_back(lr);
      }
      rep.attention.push_back(std::move(s));
      i += 3;
      continue;
    }
    LayerReport lr{l.name, l.kind, 0, 0, 0, 0, 0};
    lr.orchestrator_cycles =
        RegisterSpace::for_layer(l, cfg).stream_length() * ((l.C_o + cfg.P_Co - 1) / cfg.P_Co);
    lr.sparse_cycles = sparse_layer_cycles(l, sparsity, compute_idx[i], cfg,
                                           opt.max_sampled_tiles, l.C_o);
    lr.total_cycles = std::max(lr.orchestrator_cycles, lr.sparse_cycles) + opt.fill_cycles;
    rep.layers.push_back(lr);
    ++i;
  }
  for (const auto& lr : rep.layers) rep.total_cycles += lr.total_cycles;
  return rep;
}

}  // namespace dualsim
