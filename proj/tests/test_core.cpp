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

NetworkConfig parse_layers(const std::string& layers) {
  return parse_network_config("layers = " + layers + "\n");
}

}  // namespace

TEST(Bitmap, PopcountExamples) {
  EXPECT_EQ(popcount(SpikeBitmap::from_u64(0x9042, 16)), 4u);
  EXPECT_EQ(popcount(SpikeBitmap::from_u64(0x0, 16)), 0u);
  EXPECT_EQ(popcount(SpikeBitmap::from_u64(0x400B, 16)), 4u);
}

TEST(Bitmap, WideOperationsAndSlices) {
  SpikeBitmap b(130);
  b.set(0);
  b.set(64);
  b.set(129);
  EXPECT_EQ(b.popcount(), 3u);
  EXPECT_EQ(b.lowest_set(), 0u);
  const auto s = b.slice(60, 10);
  EXPECT_EQ(s.width(), 10u);
  EXPECT_TRUE(s.test(4));
  EXPECT_EQ(s.popcount(), 1u);
  auto n = ~b;
  EXPECT_EQ(n.popcount(), 127u);
  EXPECT_THROW(b.test(130), std::out_of_range);
}

TEST(Config, CifarNetLayerList) {
  const auto net = parse_layers("3x32x32-32c3-256c3-256c3-mp2-256c3-256c3-256c3-mp2-512c3-mp2-1024c3-ap-10");
  EXPECT_EQ(net.count(LayerKind::conv), 8u);
  EXPECT_EQ(net.count(LayerKind::max_pool), 3u);
  EXPECT_EQ(net.count(LayerKind::avg_pool), 1u);
  EXPECT_EQ(net.count(LayerKind::linear), 1u);
  EXPECT_EQ(net.compute_layers(), 9u);
  const auto& last_conv = net.layers[10];
  EXPECT_EQ(last_conv.C_i, 512u);
  EXPECT_EQ(last_conv.F_h, 4u);
  EXPECT_EQ(net.layers.back().C_i, 1024u);
  EXPECT_EQ(net.layers.back().C_o, 10u);
}

TEST(Config, MinimalNetwork) {
  const auto net = parse_layers("1x1x1-1c1-1");
  ASSERT_EQ(net.layers.size(), 2u);
  const auto& l = net.layers[0];
  EXPECT_EQ(l.kind, LayerKind::conv);
  EXPECT_EQ(l.F_h * l.F_w * l.C_i * l.C_o * l.K_h * l.K_w, 1u);
  EXPECT_EQ(l.padding, 0u);
}

TEST(Config, TransformerConfigsExpandBlocks) {
  const auto n4 = parse_network_config(config_text("spikingformer-4-256.cfg"));
  ASSERT_EQ(n4.attention_blocks.size(), 4u);
  for (const auto& b : n4.attention_blocks) {
    EXPECT_EQ(b.heads * b.head_dim, 256u);
    EXPECT_EQ(b.seq_len, 64u);
  }
  EXPECT_EQ(n4.count(LayerKind::attention_proj), 16u);
  const auto n8 = parse_network_config(config_text("spikingformer-8-512.cfg"));
  ASSERT_EQ(n8.attention_blocks.size(), 8u);
  EXPECT_EQ(n8.attention_blocks[0].heads * n8.attention_blocks[0].head_dim, 512u);
  EXPECT_EQ(n8.attention_blocks[0].seq_len, 196u);
}

TEST(Config, ParseErrorsCarryPosition) {
  try {
    parse_network_config("name = x\nlayers = 3x32x32-32q3\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_GT(e.column(), 10u);
  }
  EXPECT_THROW(parse_network_config("layers = 3x8x8-8c3\nbogus = 1\n"), ParseError);
  EXPECT_THROW(parse_network_config("layers = 3x8x8\nlayers = 3x8x8\n"), ParseError);
  EXPECT_THROW(parse_network_config("timesteps = 4\n"), ParseError);
  EXPECT_THROW(parse_network_config("sparsity = 1.5\nlayers = 3x8x8-8c3\n"), ParseError);
}

TEST(Config, ShapeErrorsNameTheLayer) {
  try {
    parse_layers("3x8x8-64c3-attn(3,16)");
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.layer(), "attn0");
  }
  EXPECT_THROW(parse_layers("3x6x6-8c3-mp4"), ShapeError);
}

TEST(Config, RoundTrip) {
  for (const char* f : {"cifar-net.cfg", "spikingformer-4-256.cfg", "spikingformer-8-512.cfg"}) {
    const auto a = parse_network_config(config_text(f));
    const auto b = parse_network_config(serialize(a));
    ASSERT_EQ(a.layers.size(), b.layers.size()) << f;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      EXPECT_EQ(a.layers[i].C_i, b.layers[i].C_i);
      EXPECT_EQ(a.layers[i].C_o, b.layers[i].C_o);
      EXPECT_EQ(a.layers[i].F_h, b.layers[i].F_h);
      EXPECT_EQ(a.layers[i].kind, b.layers[i].kind);
    }
    EXPECT_EQ(serialize(a), serialize(b));
  }
}

TEST(Config, HardwareKeys) {
  const auto cfg = parse_parallelism(config_text("spikingformer-4-256.cfg"));
  EXPECT_EQ(cfg.P_Ci, 16u);
  EXPECT_EQ(cfg.G(), 4u);
  EXPECT_EQ(cfg.P_b(), 16u * 16u * 8u);
  EXPECT_THROW(parse_parallelism("hw.P_Ci = 0\n"), ConfigError);
}

TEST(Workload, ExtremeSparsity) {
  LayerShape l;
  l.K_h = l.K_w = 3, l.C_i = 40, l.padding = 1;
  ParallelismConfig cfg;
  cfg.P_Ci = 16;
  SparsityModel m;
  m.rate = 1.0;
  for (const auto& c : generate_window(l, m, 0, {}, cfg)) EXPECT_TRUE(c.none());
  m.rate = 0.0;
  const auto dense = generate_window(l, m, 0, {}, cfg);
  ASSERT_EQ(dense.size(), chunks_per_window(l, 16));
  std::size_t ones = 0;
  for (const auto& c : dense) ones += c.popcount();
  EXPECT_EQ(ones, 9u * 40u);
  for (std::size_t i = 0; i + 1 < dense.size(); ++i) EXPECT_EQ(dense[i].popcount(), 16u);
}

TEST(Workload, BernoulliDensity) {
  LayerShape l;
  l.K_h = l.K_w = 3, l.C_i = 256, l.padding = 1;
  ParallelismConfig cfg;
  cfg.P_Ci = 16;
  SparsityModel m;
  m.rate = 0.75;
  std::size_t ones = 0, bits = 0;
  for (std::size_t x = 0; x < 500; ++x)
    for (const auto& c : generate_window(l, m, 0, GridIndex{0, x, 0}, cfg)) {
      ones += c.popcount();
      bits += c.width();
    }
  EXPECT_GE(bits, 1000000u);
  EXPECT_NEAR(static_cast<double>(ones) / static_cast<double>(bits), 0.25, 0.005);
}

TEST(Workload, DeterministicAndKeyed) {
  LayerShape l;
  l.K_h = l.K_w = 3, l.C_i = 64, l.padding = 1;
  ParallelismConfig cfg;
  cfg.P_Ts = 2, cfg.P_Fx = 4;
  SparsityModel m;
  const auto a = make_grid_workload(l, m, 3, cfg, 7);
  const auto b = make_grid_workload(l, m, 3, cfg, 7);
  const auto c = make_grid_workload(l, m, 3, cfg, 8);
  bool same = true, differ = false;
  for (std::size_t g = 0; g < a.grid_points(); ++g)
    for (std::size_t k = 0; k < a.chunk_count(); ++k) {
      same = same && a.chunk(g, k) == b.chunk(g, k);
      differ = differ || !(a.chunk(g, k) == c.chunk(g, k));
    }
  EXPECT_TRUE(same);
  EXPECT_TRUE(differ);
}
