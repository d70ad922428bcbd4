#include <gtest/gtest.h>

#include "dualsim/load_balancer.hpp"
#include "dualsim/workload.hpp"

using namespace dualsim;

namespace {

GridWorkload from_values(const std::vector<std::vector<std::uint64_t>>& grid, std::size_t width) {
  GridWorkload w(grid.size(), grid[0].size(), width);
  for (std::size_t g = 0; g < grid.size(); ++g)
    for (std::size_t c = 0; c < grid[g].size(); ++c)
      w.set_chunk(g, c, SpikeBitmap::from_u64(grid[g][c], width));
  return w;
}

ParallelismConfig cfg_of(std::size_t grid, std::size_t pci, std::size_t pwo, std::size_t M) {
  ParallelismConfig c;
  c.P_Fx = grid;
  c.P_Ci = pci;
  c.P_Wo = pwo;
  c.M = M;
  return c;
}

}  // namespace

TEST(Unified, CombinedWordInOneCycle) {
  const auto w = from_values({{0x400B}}, 16);
  EXPECT_EQ(simulate_unified(w, cfg_of(1, 16, 1, 4)).D, 1u);
}

TEST(Unified, SlowestGridPointSetsPace) {
  const auto w = from_values({{0x4}, {0x0}, {0x0}, {0xB}}, 16);
  EXPECT_EQ(simulate_unified(w, cfg_of(4, 16, 1, 1)).D, 3u);
}

TEST(Unified, AllZeroIsBroadcastPaced) {
  const auto w = from_values({{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}}, 8);
  EXPECT_EQ(simulate_unified(w, cfg_of(2, 8, 1, 1)).D, 5u);
}

TEST(Unified, NeverBeatsIdealBound) {
  ParallelismConfig c = cfg_of(8, 16, 2, 2);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto w = synthetic_workload(3, 64, 0.75, seed, c);
    const auto r = simulate_unified(w, c);
    const std::size_t ideal = (w.total_nonzeros() + 8 * 4 - 1) / (8 * 4);
    EXPECT_GE(r.D, ideal);
    EXPECT_GE(r.D, w.chunk_count() / 1);
    for (double u : r.per_unit_busy) {
      EXPECT_GE(u, 0.0);
      EXPECT_LE(u, 1.0);
    }
  }
}

TEST(Unified, MoreWorkersNeverSlowerOnAverage) {
  double prev = 1e18;
  for (std::size_t pwo : {1u, 2u, 4u}) {
    double sum = 0;
    for (std::uint64_t seed = 1; seed <= 16; ++seed) {
      const auto c = cfg_of(1, 16, pwo, 4 / pwo);
      sum += static_cast<double>(simulate_unified(synthetic_workload(3, 256, 0.75, seed, c), c).D);
    }
    EXPECT_LE(sum, prev * 1.001);
    prev = sum;
  }
}

TEST(Unified, WideWordsStayCorrectAndDeterministic) {
  const auto c = cfg_of(4, 16, 1, 4);
  const auto w = synthetic_workload(3, 64, 0.5, 3, c);
  const auto a = simulate_unified(w, c, UnifiedOptions{4, 0, false});
  const auto b = simulate_unified(w, c, UnifiedOptions{4, 0, false});
  EXPECT_EQ(a.D, b.D);
  EXPECT_LE(a.D, simulate_unified(w, c).D);
  EXPECT_GE(a.D, (w.chunk_count() + 3) / 4);
}

TEST(Crossbar, SameBankConflictsSerialize) {
  // Five PEs, each needs a different address of the only bank.
  std::vector<std::vector<std::uint64_t>> g(5, std::vector<std::uint64_t>(5, 0));
  for (std::size_t p = 0; p < 5; ++p) g[p][p] = 1;
  const auto w = from_values(g, 8);
  const auto r = simulate_crossbar(w, CrossbarModel{1, 8, 1});
  EXPECT_GE(r.stalls, 4u);
  EXPECT_EQ(r.D, 5u);
}

TEST(Crossbar, SinglePeMatchesUnified) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto c = cfg_of(1, 16, 1, 4);
    const auto w = synthetic_workload(3, 64, 0.75, seed, c);
    // Unified paces all-zero chunks at one per cycle; the crossbar PE skips them.
    const auto u = simulate_unified(w, c);
    for (std::size_t bm : {1u, 3u, 8u}) {
      const auto x = simulate_crossbar(w, CrossbarModel{bm, 16, 4});
      EXPECT_EQ(x.stalls, 0u);
      std::size_t busy = 0;
      for (std::size_t k = 0; k < w.chunk_count(); ++k) busy += (w.popcount(0, k) + 3) / 4;
      EXPECT_EQ(x.D, busy);
      EXPECT_LE(x.D, u.D);
    }
  }
}

TEST(Crossbar, MoreBanksNeverHurt) {
  const auto c = cfg_of(16, 16, 1, 4);
  double d8 = 0, d16 = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto w = synthetic_workload(3, 32, 0.75, seed, c);
    d8 += static_cast<double>(simulate_crossbar(w, CrossbarModel{8, 16, 4}).D);
    d16 += static_cast<double>(simulate_crossbar(w, CrossbarModel{16, 16, 4}).D);
  }
  EXPECT_LE(d16, d8);
}

TEST(Crossbar, BandwidthParityEnforced) {
  EXPECT_NO_THROW(check_bandwidth_parity(128, CrossbarModel{8, 16, 4}));
  EXPECT_THROW(check_bandwidth_parity(64, CrossbarModel{8, 16, 4}), ConfigError);
  EXPECT_THROW(simulate_crossbar(GridWorkload(1, 1, 8), CrossbarModel{1, 16, 4}), ConfigError);
  const auto c = cfg_of(4, 16, 1, 4);
  const auto p = simulate_paired(synthetic_workload(3, 64, 0.75, 1, c), c, CrossbarModel{4, 16, 4});
  EXPECT_EQ(p.unified_width_bits, 64u);
}

TEST(Stability, IdenticalGridPointsHaveZeroSpread) {
  const auto w = from_values({{0x1F, 0x3}, {0x1F, 0x3}, {0x1F, 0x3}}, 8);
  EXPECT_DOUBLE_EQ(sparsity_stability(w).std_over_max, 0.0);
}

TEST(Stability, BinomialSpread) {
  ParallelismConfig c;
  c.P_Fx = 128;
  c.P_Ci = 16;
  const auto w = synthetic_workload(3, 256, 0.75, 11, c);
  const double n = 2304, p = 0.25;
  EXPECT_NEAR(sparsity_stability(w, 2304).std_over_max, std::sqrt(n * p * (1 - p)) / n, 0.003);
  const auto h = synthetic_workload(3, 256, 0.5, 12, c);
  EXPECT_NEAR(sparsity_stability(h, 2304).std_over_max, 0.0104, 0.003);
}
