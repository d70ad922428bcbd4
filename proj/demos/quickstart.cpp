// Decode one word, balance one layer, and run a small network end to end.
#include <cstdio>

#include "dualsim/dualsim.hpp"

using namespace dualsim;

int main() {
  const auto word = SpikeBitmap::from_u64(0x9042, 16);
  const auto dec = decode_stream({word}, 4);
  std::printf("decode 0x9042 with 4 lanes: %zu cycle(s)\n", static_cast<std::size_t>(dec.cycles));

  ParallelismConfig cfg;
  cfg.P_Ts = 2, cfg.P_Fx = 4, cfg.P_Ci = 16, cfg.P_Co = 64, cfg.P_Wo = 2, cfg.M = 2;
  SparsityModel sparsity;
  const auto w = synthetic_workload(3, 256, sparsity.rate, 1, cfg);
  std::printf("3x3x256 window, G=%zu: unified D=%zu\n", cfg.G(),
              static_cast<std::size_t>(simulate_unified(w, cfg).D));

  const auto net = parse_network_config(
      "timesteps = 4\nlayers = 3x32x32-32c3-64c3-mp2-128c3-ap-10\n");
  const auto rep = end_to_end(net, cfg, sparsity);
  for (const auto& l : rep.layers)
    std::printf("  %-8s %10llu cycles\n", l.name.c_str(),
                static_cast<unsigned long long>(l.total_cycles));
  std::printf("total %llu cycles\n", static_cast<unsigned long long>(rep.total_cycles));
}
