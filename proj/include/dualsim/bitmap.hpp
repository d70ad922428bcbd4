// bitmap.hpp
//
// Fixed-width spike bitmaps. Bit 0 is the first channel position (LSB of the
// first storage word); bits past width() are always kept at zero.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dualsim {

class SpikeBitmap {
 public:
  SpikeBitmap() = default;

  explicit SpikeBitmap(std::size_t width)
      : width_(width), words_((width + 63) / 64, 0) {}

  // Low `width` bits of `value`; width may exceed 64 (upper bits are zero).
  static SpikeBitmap from_u64(std::uint64_t value, std::size_t width) {
    SpikeBitmap b(width);
    if (!b.words_.empty()) {
      b.words_[0] = value;
      b.trim();
    }
    return b;
  }

  static SpikeBitmap from_positions(std::size_t width,
                                    std::initializer_list<std::size_t> pos) {
    SpikeBitmap b(width);
    for (auto p : pos) b.set(p);
    return b;
  }

  static SpikeBitmap ones(std::size_t width) {
    SpikeBitmap b(width);
    std::fill(b.words_.begin(), b.words_.end(), ~std::uint64_t{0});
    b.trim();
    return b;
  }

  std::size_t width() const noexcept { return width_; }
  bool empty() const noexcept { return width_ == 0; }

  bool test(std::size_t i) const {
    check_index(i);
    return (words_[i / 64] >> (i % 64)) & 1U;
  }

  void set(std::size_t i, bool value = true) {
    check_index(i);
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (value)
      words_[i / 64] |= mask;
    else
      words_[i / 64] &= ~mask;
  }

  void reset(std::size_t i) { set(i, false); }

  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  bool none() const noexcept {
    return std::all_of(words_.begin(), words_.end(),
                       [](std::uint64_t w) { return w == 0; });
  }
  bool any() const noexcept { return !none(); }

  // Position of the lowest set bit, or width() if none.
  std::size_t lowest_set() const noexcept {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      if (words_[k] != 0)
        return k * 64 + static_cast<std::size_t>(std::countr_zero(words_[k]));
    }
    return width_;
  }

  std::uint64_t to_u64() const {
    if (width_ > 64)
      throw std::logic_error("SpikeBitmap::to_u64: width exceeds 64 bits");
    return words_.empty() ? 0 : words_[0];
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::span<std::uint64_t> mutable_words() noexcept { return words_; }

  // Re-establishes the zero-tail invariant after raw word writes.
  void trim() noexcept {
    if (width_ % 64 != 0 && !words_.empty())
      words_.back() &= (std::uint64_t{1} << (width_ % 64)) - 1;
  }

  SpikeBitmap& operator&=(const SpikeBitmap& o) {
    check_same(o);
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= o.words_[k];
    return *this;
  }
  SpikeBitmap& operator|=(const SpikeBitmap& o) {
    check_same(o);
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= o.words_[k];
    return *this;
  }
  SpikeBitmap& operator^=(const SpikeBitmap& o) {
    check_same(o);
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] ^= o.words_[k];
    return *this;
  }

  friend SpikeBitmap operator&(SpikeBitmap a, const SpikeBitmap& b) { return a &= b; }
  friend SpikeBitmap operator|(SpikeBitmap a, const SpikeBitmap& b) { return a |= b; }
  friend SpikeBitmap operator^(SpikeBitmap a, const SpikeBitmap& b) { return a ^= b; }

  friend SpikeBitmap operator~(SpikeBitmap a) {
    for (auto& w : a.words_) w = ~w;
    a.trim();
    return a;
  }

  friend bool operator==(const SpikeBitmap&, const SpikeBitmap&) = default;

  // Copies bits [offset, offset + len) into a new bitmap of width len.
  SpikeBitmap slice(std::size_t offset, std::size_t len) const {
    if (offset + len > width_)
      throw std::out_of_range("SpikeBitmap::slice out of range");
    SpikeBitmap out(len);
    for (std::size_t i = 0; i < len; ++i)
      if (test(offset + i)) out.set(i);
    return out;
  }

  // Writes `src` into bits [offset, offset + src.width()).
  void assign(std::size_t offset, const SpikeBitmap& src) {
    if (offset + src.width() > width_)
      throw std::out_of_range("SpikeBitmap::assign out of range");
    for (std::size_t i = 0; i < src.width(); ++i) set(offset + i, src.test(i));
  }

  // Hex string, most significant nibble first, e.g. "0x9042".
  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    const std::size_t nibbles = std::max<std::size_t>(1, (width_ + 3) / 4);
    std::string s = "0x";
    for (std::size_t n = nibbles; n-- > 0;) {
      unsigned v = 0;
      for (unsigned b = 0; b < 4; ++b) {
        const std::size_t i = n * 4 + b;
        if (i < width_ && test(i)) v |= 1U << b;
      }
      s.push_back(kDigits[v]);
    }
    return s;
  }

 private:
  void check_index(std::size_t i) const {
    if (i >= width_) throw std::out_of_range("SpikeBitmap bit index out of range");
  }
  void check_same(const SpikeBitmap& o) const {
    if (o.width_ != width_) throw std::invalid_argument("SpikeBitmap width mismatch");
  }

  std::size_t width_ = 0;
  std::vector<std::uint64_t> words_;
};

inline std::size_t popcount(const SpikeBitmap& b) noexcept { return b.popcount(); }

}  // namespace dualsim
