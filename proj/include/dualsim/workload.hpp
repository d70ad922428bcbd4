// workload.hpp
//
// Deterministic synthetic spike workloads. Every chunk is drawn from its own
// counter-based stream keyed by (seed, layer, grid index, chunk index), so the
// bits a chunk receives do not depend on generation order.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "dualsim/bitmap.hpp"
#include "dualsim/config.hpp"

namespace dualsim {

// SplitMix64 stream; used only as a keyed counter-based source.
class KeyedStream {
 public:
  explicit KeyedStream(std::uint64_t key) : state_(key) {}

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t key(std::uint64_t seed, std::uint64_t layer,
                           std::uint64_t grid, std::uint64_t chunk) noexcept {
    std::uint64_t k = mix(seed + 0x9e3779b97f4a7c15ULL);
    k = mix(k ^ (layer + 0x632be59bd9b4e019ULL));
    k = mix(k ^ (grid + 0x8cb92ba72f3d8dd7ULL));
    return mix(k ^ (chunk + 0xd6e8feb86659fd93ULL));
  }

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  // 64 independent Bernoulli(p) bits. Each bit compares a lazily expanded
  // uniform against the binary expansion of p, 53 digits deep.
  std::uint64_t bernoulli_word(double p) noexcept {
    if (p >= 1.0) return ~std::uint64_t{0};
    if (!(p > 0.0)) return 0;
    std::uint64_t result = 0;
    std::uint64_t undecided = ~std::uint64_t{0};
    double frac = p;
    for (int digit = 0; digit < 53 && undecided != 0; ++digit) {
      frac *= 2.0;
      const bool one = frac >= 1.0;
      if (one) frac -= 1.0;
      const std::uint64_t r = next();
      if (one) {
        result |= undecided & ~r;  // uniform digit 0 under p digit 1 -> below p
        undecided &= r;
      } else {
        undecided &= ~r;  // uniform digit 1 under p digit 0 -> above p
      }
      if (frac == 0.0) break;  // remaining digits of p are zero
    }
    return result;
  }

 private:
  std::uint64_t state_;
};

// chunks[g][c] of a fixed width, stored flat.
class GridWorkload {
 public:
  GridWorkload() = default;
  GridWorkload(std::size_t grid_points, std::size_t chunk_count,
               std::size_t chunk_width)
      : grid_(grid_points),
        chunks_(chunk_count),
        width_(chunk_width),
        wpc_((chunk_width + 63) / 64),
        words_(grid_points * chunk_count * wpc_, 0),
        pop_(grid_points * chunk_count, 0) {}

  std::size_t grid_points() const noexcept { return grid_; }
  std::size_t chunk_count() const noexcept { return chunks_; }
  std::size_t chunk_width() const noexcept { return width_; }

  SpikeBitmap chunk(std::size_t g, std::size_t c) const {
    SpikeBitmap b(width_);
    auto src = raw(g, c);
    std::copy(src.begin(), src.end(), b.mutable_words().begin());
    return b;
  }

  void set_chunk(std::size_t g, std::size_t c, const SpikeBitmap& b) {
    if (b.width() != width_) throw std::invalid_argument("chunk width mismatch");
    auto dst = mutable_raw(g, c);
    std::copy(b.words().begin(), b.words().end(), dst.begin());
    pop_[g * chunks_ + c] = static_cast<std::uint32_t>(b.popcount());
  }

  std::size_t popcount(std::size_t g, std::size_t c) const {
    return pop_.at(g * chunks_ + c);
  }

  std::size_t grid_popcount(std::size_t g) const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < chunks_; ++c) n += pop_[g * chunks_ + c];
    return n;
  }

  std::size_t total_nonzeros() const {
    std::size_t n = 0;
    for (auto p : pop_) n += p;
    return n;
  }

  // Appends the chunks of `other` after this workload's chunks.
  void append(const GridWorkload& other) {
    if (chunks_ == 0 && grid_ == 0) {
      *this = other;
      return;
    }
    if (other.grid_ != grid_ || other.width_ != width_)
      throw std::invalid_argument("GridWorkload::append geometry mismatch");
    GridWorkload out(grid_, chunks_ + other.chunks_, width_);
    for (std::size_t g = 0; g < grid_; ++g) {
      for (std::size_t c = 0; c < chunks_; ++c) out.copy_from(*this, g, c, g, c);
      for (std::size_t c = 0; c < other.chunks_; ++c)
        out.copy_from(other, g, c, g, chunks_ + c);
    }
    *this = std::move(out);
  }

 private:
  std::span<const std::uint64_t> raw(std::size_t g, std::size_t c) const {
    check(g, c);
    return {words_.data() + (g * chunks_ + c) * wpc_, wpc_};
  }
  std::span<std::uint64_t> mutable_raw(std::size_t g, std::size_t c) {
    check(g, c);
    return {words_.data() + (g * chunks_ + c) * wpc_, wpc_};
  }
  void check(std::size_t g, std::size_t c) const {
    if (g >= grid_ || c >= chunks_) throw std::out_of_range("GridWorkload index");
  }
  void copy_from(const GridWorkload& src, std::size_t sg, std::size_t sc,
                 std::size_t dg, std::size_t dc) {
    auto s = src.raw(sg, sc);
    std::copy(s.begin(), s.end(), mutable_raw(dg, dc).begin());
    pop_[dg * chunks_ + dc] = src.pop_[sg * src.chunks_ + sc];
  }

  std::size_t grid_ = 0, chunks_ = 0, width_ = 0, wpc_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::uint32_t> pop_;
};

// Grid point (t, x) of one layer tile. `tile` distinguishes successive tiles
// of the same layer so they draw different bits.
struct GridIndex {
  std::size_t t = 0;
  std::size_t x = 0;
  std::size_t tile = 0;
};

inline std::size_t chunks_per_window(const LayerShape& layer,
                                     std::size_t chunk_width) {
  return (layer.window_bits() + chunk_width - 1) / chunk_width;
}

// Chunk bitmaps covering one K_h x K_w x C_i window. The final chunk is
// zero-filled past the window.
inline std::vector<SpikeBitmap> generate_window(const LayerShape& layer,
                                                const SparsityModel& model,
                                                std::size_t layer_index,
                                                GridIndex grid,
                                                const ParallelismConfig& cfg) {
  model.validate();
  const std::size_t width = cfg.P_Ci;
  const std::size_t total = layer.window_bits();
  const std::size_t n = chunks_per_window(layer, width);
  const double density = 1.0 - model.rate_for(layer_index);
  const std::uint64_t grid_key =
      (static_cast<std::uint64_t>(grid.tile) << 32) ^
      (static_cast<std::uint64_t>(grid.t) << 16) ^ grid.x;
  std::vector<SpikeBitmap> out;
  out.reserve(n);
  for (std::size_t c = 0; c < n; ++c) {
    KeyedStream rng(KeyedStream::key(model.seed, layer_index, grid_key, c));
    SpikeBitmap b(width);
    for (auto& w : b.mutable_words()) w = rng.bernoulli_word(density);
    const std::size_t valid = std::min(width, total - c * width);
    if (valid < width) {
      for (std::size_t i = valid; i < width; ++i) b.reset(i);
    }
    b.trim();
    out.push_back(std::move(b));
  }
  return out;
}

// One tile of the sparse engine: P_Ts x P_Fx grid points, each holding the
// chunked window it will consume.
inline GridWorkload make_grid_workload(const LayerShape& layer,
                                       const SparsityModel& model,
                                       std::size_t layer_index,
                                       const ParallelismConfig& cfg,
                                       std::size_t tile = 0) {
  const std::size_t n = chunks_per_window(layer, cfg.P_Ci);
  GridWorkload w(cfg.grid_points(), n, cfg.P_Ci);
  for (std::size_t t = 0; t < cfg.P_Ts; ++t) {
    for (std::size_t x = 0; x < cfg.P_Fx; ++x) {
      const auto chunks = generate_window(layer, model, layer_index,
                                          GridIndex{t, x, tile}, cfg);
      const std::size_t g = t * cfg.P_Fx + x;
      for (std::size_t c = 0; c < n; ++c) w.set_chunk(g, c, chunks[c]);
    }
  }
  return w;
}

// Synthetic single-layer workload used by the sweeps: a K x K window over
// `channels` input channels at every grid point.
inline GridWorkload synthetic_workload(std::size_t kernel, std::size_t channels,
                                       double rate, std::uint64_t seed,
                                       const ParallelismConfig& cfg) {
  LayerShape l;
  l.name = "synthetic";
  l.K_h = l.K_w = kernel;
  l.C_i = channels;
  l.padding = kernel / 2;
  SparsityModel m;
  m.rate = rate;
  m.seed = seed;
  return make_grid_workload(l, m, 0, cfg, 0);
}

}  // namespace dualsim
