#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dualsim/orchestrator.hpp"

using namespace dualsim;

namespace {

FeatureMap random_map(std::mt19937_64& rng, const LayerShape& l) {
  FeatureMap fm(l.T_s, l.F_h, l.F_w, l.C_i);
  for (std::size_t t = 0; t < l.T_s; ++t)
    for (std::size_t h = 0; h < l.F_h; ++h)
      for (std::size_t w = 0; w < l.F_w; ++w)
        for (std::size_t c = 0; c < l.C_i; ++c) fm.set(t, h, w, c, rng() % 3 == 0);
  return fm;
}

LayerShape figure_layer() {
  LayerShape l;
  l.name = "figure";
  l.F_h = 3, l.F_w = 8, l.C_i = 8, l.C_o = 8, l.K_h = l.K_w = 3, l.padding = 1;
  return l;
}

ParallelismConfig figure_cfg() {
  ParallelismConfig c;
  c.P_Fx = 4, c.P_Ci = 1, c.M = 1;
  return c;
}

}  // namespace

TEST(Orchestrator, FigureStreamLengthAndTiming) {
  std::mt19937_64 rng(1);
  const auto l = figure_layer();
  const auto cfg = figure_cfg();
  const auto r = pop_stream(random_map(rng, l), l, cfg);
  // out_h * out_w / P_Fx * K_h * K_w * C_i / P_Ci
  EXPECT_EQ(r.stream.size(), 3u * 8u / 4u * 9u * 8u);
  EXPECT_EQ(r.pop_cycles, r.stream.size());
  EXPECT_EQ(r.push_cycles, RegisterSpace::for_layer(l, cfg).push_words());
  EXPECT_EQ(r.pop_stalls, 0u);
  EXPECT_EQ(r.starved_cycles, 0u);
  EXPECT_EQ(r.total_cycles, r.fill_cycles + r.pop_cycles);
}

TEST(Orchestrator, FigureChannelSweepRotatesBanks) {
  std::mt19937_64 rng(2);
  const auto l = figure_layer();
  const auto r = pop_stream(random_map(rng, l), l, figure_cfg(), true);
  // First output group of the first row: k_h = 0 rows are padding, so look at k_h = 1.
  std::size_t seen = 0;
  ASSERT_GE(r.trace.size(), 72u);
  for (std::size_t i = 0; i < 72; ++i) {
    const auto& e = r.trace[i];
    EXPECT_EQ(e.group, 0u);
    if (e.k_h != 1) continue;
    if (e.k_w == 1) {
      // Centre tap: pixels 0..3 of channel cb live in banks rotated by cb.
      EXPECT_EQ(e.rotation, e.cb % 4);
      ++seen;
    }
    std::set<std::size_t> banks;
    for (std::size_t b = 0; b < e.bank_address.size(); ++b)
      if (e.bank_address[b]) banks.insert(b);
    EXPECT_LE(banks.size(), 4u);
  }
  EXPECT_EQ(seen, 8u);
}

TEST(Orchestrator, PushPlacementIsABijection) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    LayerShape l;
    l.name = "push";
    l.stride = 1 + rng() % 2;
    l.K_h = l.K_w = 3;
    l.padding = 1;
    l.F_h = 3;
    l.F_w = l.stride * (1 + rng() % 6) - (l.stride == 2 ? 1 : 0);
    if ((l.F_w + 2 - 3) % l.stride) continue;
    l.C_i = 1 + rng() % 20;
    ParallelismConfig c;
    c.P_Fx = 1 + rng() % 4, c.P_Ci = 1 + rng() % 6, c.M = 1;
    if (c.P_Ci % c.M) continue;
    Orchestrator o(l, c);
    const auto& rs = o.registers();
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (std::size_t w = 0; w < l.F_w; ++w)
      for (std::size_t cb = 0; cb < rs.channel_blocks; ++cb) {
        const auto loc = o.locate(0, w, cb);
        EXPECT_LT(loc.first, c.P_Fx);
        EXPECT_LT(loc.second, rs.depth);
        EXPECT_TRUE(used.insert(loc).second) << "collision at w=" << w << " cb=" << cb;
      }
  }
}

TEST(Orchestrator, SingleSweepHasNoRotation) {
  LayerShape l;
  l.name = "single";
  l.F_h = 2, l.F_w = 8, l.C_i = 4, l.K_h = l.K_w = 1;
  ParallelismConfig c;
  c.P_Fx = 4, c.P_Ci = 1, c.M = 1;
  Orchestrator o(l, c);
  for (std::size_t w = 0; w < 8; ++w) EXPECT_EQ(o.locate(0, w, 0).first, w % 4);
}

TEST(Orchestrator, OneByOneKernelRetilesInput) {
  std::mt19937_64 rng(4);
  LayerShape l;
  l.name = "1x1";
  l.T_s = 2, l.F_h = 3, l.F_w = 4, l.C_i = 6, l.K_h = l.K_w = 1;
  ParallelismConfig c;
  c.P_Ts = 2, c.P_Fx = 2, c.P_Ci = 3, c.M = 1;
  const auto fm = random_map(rng, l);
  const auto r = pop_stream(fm, l, c);
  ASSERT_EQ(r.stream.size(), 3u * 2u * 2u);
  std::size_t k = 0;
  for (std::size_t h = 0; h < 3; ++h)
    for (std::size_t g = 0; g < 2; ++g)
      for (std::size_t cb = 0; cb < 2; ++cb, ++k)
        for (std::size_t p = 0; p < 2; ++p)
          for (std::size_t t = 0; t < 2; ++t)
            for (std::size_t i = 0; i < 3; ++i)
              EXPECT_EQ(r.stream[k].test(p * 6 + t * 3 + i), fm.at(t, h, g * 2 + p, cb * 3 + i));
}

TEST(Orchestrator, ReferenceCornerCases) {
  LayerShape l;
  l.name = "corner";
  l.F_h = l.F_w = 1, l.C_i = 1, l.K_h = l.K_w = 3, l.padding = 1;
  ParallelismConfig c;
  c.P_Ci = 1, c.M = 1;
  FeatureMap fm(1, 1, 1, 1);
  fm.set(0, 0, 0, 0);
  const auto s = reference_im2col(fm, l, c);
  ASSERT_EQ(s.size(), 9u);
  std::size_t nonzero = 0;
  for (const auto& v : s) nonzero += v.any();
  EXPECT_EQ(nonzero, 1u);
  EXPECT_EQ(pop_stream(fm, l, c).stream, s);
  const auto zero = reference_im2col(FeatureMap(1, 1, 1, 1), l, c);
  for (const auto& v : zero) EXPECT_TRUE(v.none());
}

TEST(Orchestrator, RandomLayersMatchReference) {
  std::mt19937_64 rng(5);
  std::size_t cases = 0;
  for (std::size_t K : {1u, 3u})
    for (std::size_t s : {1u, 2u})
      for (std::size_t p : {0u, 1u})
        for (int rep = 0; rep < 12; ++rep) {
          LayerShape l;
          l.name = "random";
          l.K_h = l.K_w = K, l.stride = s, l.padding = p;
          l.T_s = 1 + rng() % 3;
          const std::size_t oh = 1 + rng() % 4, ow = 1 + rng() % 9;
          const long fh = static_cast<long>((oh - 1) * s + K) - 2 * static_cast<long>(p);
          const long fw = static_cast<long>((ow - 1) * s + K) - 2 * static_cast<long>(p);
          if (fh < 1 || fw < 1) continue;
          l.F_h = static_cast<std::size_t>(fh), l.F_w = static_cast<std::size_t>(fw);
          l.C_i = 1 + rng() % 24;
          ParallelismConfig c;
          c.P_Ts = 1 + rng() % 2, c.P_Fx = 1 + rng() % 4, c.P_Ci = 1 + rng() % 8, c.M = 1;
          const auto fm = random_map(rng, l);
          const auto r = pop_stream(fm, l, c);
          ASSERT_EQ(r.stream, reference_im2col(fm, l, c))
              << "K=" << K << " s=" << s << " p=" << p << " F=" << l.F_h << "x" << l.F_w;
          EXPECT_EQ(r.pop_stalls, 0u);
          EXPECT_GT(r.port_checked_cycles, 0u);
          ++cases;
        }
  EXPECT_GT(cases, 60u);
}

TEST(Orchestrator, RejectsMismatchedMap) {
  const auto l = figure_layer();
  EXPECT_THROW(pop_stream(FeatureMap(1, 3, 7, 8), l, figure_cfg()), ConfigError);
}
