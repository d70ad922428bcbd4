#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "dualsim/dualsim.hpp"

using namespace dualsim;

namespace {

std::string config_text(const std::string& name) {
  std::ifstream f(std::string(DUALSIM_CONFIG_DIR) + "/" + name);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

LayerShape attn_shape(std::size_t side, std::size_t C_i) {
  LayerShape l;
  l.name = "attn";
  l.kind = LayerKind::attention_proj;
  l.F_h = l.F_w = side, l.C_i = C_i, l.C_o = C_i, l.K_h = l.K_w = 1;
  return l;
}

LatencyFn constant(std::uint64_t d) {
  return [d](HeadOp, std::size_t) { return d; };
}

}  // namespace

TEST(Pipeline, TrivialWorkloads) {
  LayerShape l = attn_shape(1, 1);
  ParallelismConfig c;
  c.P_Ci = 1, c.M = 1;
  const auto w = compute_workloads(l, c);
  EXPECT_EQ(w.W_s, 1u);
  EXPECT_EQ(w.W_b, 1u);
  EXPECT_EQ(w.P_s, 1u);
  EXPECT_EQ(w.P_b, 1u);
  l.kind = LayerKind::conv;
  EXPECT_EQ(compute_workloads(l, c).W_b, 0u);
}

TEST(Pipeline, RequiredPbAtUnitRatio) {
  const auto pb = required_pb(attn_shape(4, 16), 96);
  EXPECT_DOUBLE_EQ(pb.target, 64.0);
  EXPECT_EQ(pb.P_b(), 64u);
}

TEST(Pipeline, RequiredPbSmallSequence) {
  // L = 16 tokens, C_i = 512: target is P_s / 48.
  const auto pb = required_pb(attn_shape(4, 512), 4608);
  EXPECT_DOUBLE_EQ(pb.target, 96.0);
  EXPECT_EQ(pb.P_b(), 96u);
}

TEST(Pipeline, RequiredPbIsLegalAndMinimal) {
  for (std::size_t side : {4u, 8u, 14u})
    for (std::size_t C_i : {64u, 256u, 512u})
      for (std::size_t P_s : {1024u, 8192u}) {
        const auto pb = required_pb(attn_shape(side, C_i), P_s);
        EXPECT_GE(static_cast<double>(pb.P_b()), pb.target - 1e-9);
        EXPECT_LE(pb.P_Bn, pb.P_Bm);
        EXPECT_LE(pb.P_Bm, 2 * pb.P_Bn);
        EXPECT_LE(pb.P_Bk, 128u);
        // No legal choice is strictly smaller.
        for (std::size_t m = 1; m <= 64; m *= 2)
          for (std::size_t n = std::max<std::size_t>(1, m / 2); n <= m; n *= 2)
            for (std::size_t k = 1; k <= 128; ++k)
              if (static_cast<double>(m * n * k) >= pb.target - 1e-9) {
                EXPECT_GE(m * n * k, pb.P_b());
                break;
              }
      }
}

TEST(Pipeline, RequiredPbForTransformerBlock) {
  const auto pb = required_pb(attn_shape(8, 256), 8192);
  EXPECT_EQ(pb.P_b(), 1376u);
}

TEST(Pipeline, RequiredPbRejectsZeroChannels) {
  EXPECT_THROW(required_pb(attn_shape(4, 0), 64), ConfigError);
}

TEST(Pipeline, ZeroLengthBinaryJobs) {
  const auto s = schedule_heads(4, constant(10), constant(0));
  check_schedule(s);
  EXPECT_EQ(s.total_cycles, 120u);
  EXPECT_EQ(s.sparse_cycles, 120u);
  EXPECT_EQ(s.binary_cycles, 0u);
  EXPECT_EQ(s.exposed_binary_cycles, 0u);
  EXPECT_DOUBLE_EQ(s.utilization_sparse(), 1.0);
}

TEST(Pipeline, BalancedScheduleHidesBinaryWork) {
  // Binary work per head equals the sparse work of one head: only the tail of the
  // last head is exposed (S7 starts after K7, O7 ends 30 cycles later).
  const auto s = schedule_heads(8, constant(10), constant(15));
  check_schedule(s);
  EXPECT_EQ(s.sparse_cycles, 240u);
  EXPECT_EQ(s.binary_cycles, 240u);
  EXPECT_EQ(s.exposed_binary_cycles, 20u);
  // Halving the binary array doubles its latency and exposes far more.
  const auto h = schedule_heads(8, constant(10), constant(30));
  check_schedule(h);
  EXPECT_GT(h.exposed_binary_cycles, 4 * s.exposed_binary_cycles);
  EXPECT_LT(h.utilization_sparse(), s.utilization_sparse());
}

TEST(Pipeline, ScheduleOrdering) {
  const auto s = schedule_heads(2, constant(3), constant(2));
  ASSERT_EQ(s.entries.size(), 10u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(s.entries[i].engine, Engine::sparse);
    EXPECT_EQ(s.entries[i].start, 3 * i);
  }
  // S0 waits for K0, O0 waits for V0.
  EXPECT_EQ(s.entries[6].op, HeadOp::S);
  EXPECT_EQ(s.entries[6].start, 6u);
  EXPECT_EQ(s.entries[7].op, HeadOp::O);
  EXPECT_EQ(s.entries[7].start, 9u);
  EXPECT_STREQ(to_string(HeadOp::S), "QK^T");
}

TEST(Pipeline, CheckScheduleCatchesViolations) {
  auto s = schedule_heads(2, constant(3), constant(2));
  auto bad = s;
  bad.entries[6].start = 0;  // S0 before K0
  bad.entries[6].end = 2;
  EXPECT_THROW(check_schedule(bad), std::logic_error);
  bad = s;
  bad.entries[1].start = 1;  // K0 overlaps Q0
  bad.entries[1].end = 4;
  EXPECT_THROW(check_schedule(bad), std::logic_error);
  bad = s;
  bad.entries[0].end = 0, bad.entries[0].start = 2;
  EXPECT_THROW(check_schedule(bad), std::logic_error);
}

TEST(EndToEnd, CifarSparsityHelps) {
  const auto text = config_text("cifar-net.cfg");
  const auto net = parse_network_config(text);
  const auto cfg = parse_parallelism(text);
  const auto sparse = end_to_end(net, cfg, net.sparsity);
  SparsityModel dense = net.sparsity;
  dense.rate = 0.0;
  const auto full = end_to_end(net, cfg, dense);
  EXPECT_EQ(sparse.layers.size(), net.layers.size());
  EXPECT_TRUE(sparse.attention.empty());
  EXPECT_LT(sparse.total_cycles, full.total_cycles);
  std::uint64_t sum = 0;
  for (const auto& l : sparse.layers) {
    sum += l.total_cycles;
    if (l.kind == LayerKind::max_pool || l.kind == LayerKind::avg_pool) EXPECT_EQ(l.total_cycles, 0u);
  }
  EXPECT_EQ(sum, sparse.total_cycles);
  EXPECT_EQ(end_to_end(net, cfg, net.sparsity).total_cycles, sparse.total_cycles);
}

TEST(EndToEnd, SingleLayerIsSparsePlusFill) {
  const auto net = parse_network_config("layers = 8x4x4-16c1\n");
  ParallelismConfig c;
  c.P_Fx = 4, c.P_Ci = 8, c.P_Co = 8, c.M = 2;
  SparsityModel empty;
  empty.rate = 1.0;
  EndToEndOptions opt;
  opt.fill_cycles = 5;
  const auto r = end_to_end(net, c, empty, opt);
  ASSERT_EQ(r.layers.size(), 1u);
  const auto& l = r.layers[0];
  // All-zero input: one cycle per chunk, one chunk per tile, 4 tiles, 2 channel passes.
  EXPECT_EQ(l.sparse_cycles, 8u);
  EXPECT_EQ(l.total_cycles, std::max(l.orchestrator_cycles, l.sparse_cycles) + 5);
  EXPECT_EQ(r.total_cycles, l.total_cycles);
}

TEST(EndToEnd, TransformerSchedulesAreValid) {
  const auto text = config_text("spikingformer-4-256.cfg");
  const auto net = parse_network_config(text);
  const auto cfg = parse_parallelism(text);
  const auto r = end_to_end(net, cfg, net.sparsity);
  ASSERT_EQ(r.attention.size(), 4u);
  for (const auto& s : r.attention) {
    EXPECT_NO_THROW(check_schedule(s));
    EXPECT_EQ(s.entries.size(), 8u * 5u);
    EXPECT_GE(s.total_cycles, s.sparse_cycles);
    EXPECT_GT(s.binary_cycles, 0u);
  }
}
