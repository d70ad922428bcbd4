// config.hpp
//
// Hardware parallelism, layer geometry, and network descriptions, plus the
// text config format used by the CLI. A config document is a list of
// `key = value` lines (`#` starts a comment). The `layers` key carries a
// compact layer-list string:
//
//   list  := input ('-' item)*
//   input := C 'x' H 'x' W
//   item  := C 'c' K ['s' S] ['p' P]     convolution (default stride 1, pad K/2)
//          | 'mp' K                      max pool, K x K window, stride K
//          | 'ap'                        global average pool
//          | 'fc' N | N                  fully connected layer with N outputs
//          | 'attn(' H ',' D ')'         self-attention, H heads of width D
//          | '[' item ('-' item)* ']x' N repetition group
//
// e.g. "3x32x32-32c3-256c3-mp2-[attn(16,16)-1024c1-256c1]x4-ap-10".

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dualsim/errors.hpp"

namespace dualsim {

struct ParallelismConfig {
  std::size_t P_Ts = 1;
  std::size_t P_Fx = 1;
  std::size_t P_Ci = 16;
  std::size_t P_Co = 1;
  std::size_t P_Wo = 1;
  std::size_t M = 4;
  std::size_t B_m = 1;
  std::size_t P_Bm = 1;
  std::size_t P_Bn = 1;
  std::size_t P_Bk = 1;
  std::size_t lanes_per_dsp = 4;

  std::size_t G() const noexcept { return P_Wo * M; }
  std::size_t grid_points() const noexcept { return P_Ts * P_Fx; }
  std::size_t P_s() const noexcept { return P_Ts * P_Fx * P_Ci * P_Co; }
  std::size_t P_b() const noexcept { return P_Bm * P_Bn * P_Bk; }

  void validate() const {
    for (auto v : {P_Ts, P_Fx, P_Ci, P_Co, P_Wo, M, B_m, P_Bm, P_Bn, P_Bk,
                   lanes_per_dsp}) {
      if (v == 0) throw ConfigError("parallelism parameters must be >= 1");
    }
    if (P_Ci % M != 0) throw ConfigError("P_Ci must be a multiple of M");
  }

  friend bool operator==(const ParallelismConfig&,
                         const ParallelismConfig&) = default;
};

enum class LayerKind { conv, linear, attention_proj, max_pool, avg_pool };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::linear: return "linear";
    case LayerKind::attention_proj: return "attention_proj";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::avg_pool: return "avg_pool";
  }
  return "?";
}

enum class ProjRole { none, query, key, value, output };

struct LayerShape {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::size_t T_s = 1;
  std::size_t F_h = 1;
  std::size_t F_w = 1;
  std::size_t C_i = 1;
  std::size_t C_o = 1;
  std::size_t K_h = 1;
  std::size_t K_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // Attention projections only: owning block and role.
  std::optional<std::size_t> block;
  ProjRole role = ProjRole::none;

  bool is_compute() const noexcept {
    return kind == LayerKind::conv || kind == LayerKind::linear ||
           kind == LayerKind::attention_proj;
  }

  std::size_t out_h() const { return out_dim(F_h, K_h); }
  std::size_t out_w() const { return out_dim(F_w, K_w); }

  // Bits in one kernel window.
  std::size_t window_bits() const noexcept { return K_h * K_w * C_i; }

  void validate() const {
    if (T_s == 0 || F_h == 0 || F_w == 0 || C_i == 0 || C_o == 0 || K_h == 0 ||
        K_w == 0 || stride == 0)
      throw ShapeError(name, "all dimensions must be positive");
    if (stride > 2) throw ShapeError(name, "stride must be 1 or 2");
    check_dim(F_h, K_h, "height");
    check_dim(F_w, K_w, "width");
  }

  friend bool operator==(const LayerShape&, const LayerShape&) = default;

 private:
  std::size_t out_dim(std::size_t f, std::size_t k) const {
    const std::size_t span = f + 2 * padding;
    if (span < k) return 0;
    return (span - k) / stride + 1;
  }
  void check_dim(std::size_t f, std::size_t k, const char* axis) const {
    const std::size_t span = f + 2 * padding;
    if (span < k || (span - k) % stride != 0)
      throw ShapeError(name, std::string("output ") + axis +
                                 " (F - K + 2*padding)/stride + 1 is not a "
                                 "positive integer");
  }
};

struct AttentionBlock {
  std::size_t heads = 1;
  std::size_t head_dim = 1;  // d per head; heads * head_dim = embedding width
  std::size_t seq_len = 1;   // L = F_h * F_w of the feeding layer
  std::int64_t delta1 = 1;
  std::int64_t delta2 = 1;
  std::size_t first_layer = 0;  // index of the query projection in layers

  friend bool operator==(const AttentionBlock&, const AttentionBlock&) = default;
};

enum class SparsityKind { bernoulli, per_layer_profile };

struct SparsityModel {
  SparsityKind kind = SparsityKind::bernoulli;
  double rate = 0.75;  // probability that a bit is zero
  std::uint64_t seed = 1;
  std::vector<double> layer_rates;  // per compute layer, per_layer_profile only

  double rate_for(std::size_t compute_layer) const {
    if (kind == SparsityKind::per_layer_profile &&
        compute_layer < layer_rates.size())
      return layer_rates[compute_layer];
    return rate;
  }

  void validate() const {
    auto bad = [](double r) { return !(r >= 0.0 && r <= 1.0); };
    if (bad(rate)) throw ConfigError("sparsity rate must lie in [0, 1]");
    for (double r : layer_rates)
      if (bad(r)) throw ConfigError("per-layer sparsity rate must lie in [0, 1]");
  }

  friend bool operator==(const SparsityModel&, const SparsityModel&) = default;
};

struct NetworkConfig {
  std::string name;
  std::size_t timesteps = 1;
  std::size_t in_c = 1, in_h = 1, in_w = 1;
  std::vector<LayerShape> layers;
  std::vector<AttentionBlock> attention_blocks;
  SparsityModel sparsity;

  std::size_t count(LayerKind k) const {
    std::size_t n = 0;
    for (const auto& l : layers) n += (l.kind == k);
    return n;
  }
  std::size_t compute_layers() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.is_compute();
    return n;
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Cursor over one layer-list string; columns are reported relative to the
// document line it came from.
class LayerListParser {
 public:
  LayerListParser(std::string_view text, std::size_t line, std::size_t col0)
      : s_(text), line_(line), col0_(col0) {}

  struct Item {
    enum class Kind { conv, max_pool, avg_pool, fc, attn, group } kind;
    std::size_t a = 0, b = 0, stride = 1;
    std::optional<std::size_t> padding;
    std::vector<Item> children;
    std::size_t repeat = 1;
    std::size_t column = 0;
  };

  struct Parsed {
    std::size_t c, h, w;
    std::vector<Item> items;
  };

  Parsed parse() {
    Parsed out;
    out.c = number();
    expect('x');
    out.h = number();
    expect('x');
    out.w = number();
    while (!eof()) {
      expect('-');
      out.items.push_back(item());
    }
    return out;
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  std::size_t column() const { return col0_ + pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, line_, column());
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool accept(std::string_view lit) {
    if (s_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }

  std::size_t number() {
    std::size_t v = 0;
    auto [ptr, ec] =
        std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc{} || ptr == s_.data() + pos_) fail("expected a number");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

  Item item() {
    Item it;
    it.column = column();
    if (accept("[")) {
      it.kind = Item::Kind::group;
      it.children.push_back(item());
      while (peek() == '-') {
        ++pos_;
        it.children.push_back(item());
      }
      expect(']');
      expect('x');
      it.repeat = number();
      if (it.repeat == 0) fail("repeat count must be positive");
      return it;
    }
    if (accept("attn(")) {
      it.kind = Item::Kind::attn;
      it.a = number();
      expect(',');
      it.b = number();
      expect(')');
      return it;
    }
    if (accept("mp")) {
      it.kind = Item::Kind::max_pool;
      it.a = number();
      return it;
    }
    if (accept("ap")) {
      it.kind = Item::Kind::avg_pool;
      return it;
    }
    if (accept("fc")) {
      it.kind = Item::Kind::fc;
      it.a = number();
      return it;
    }
    it.a = number();
    if (peek() == 'c') {
      ++pos_;
      it.kind = Item::Kind::conv;
      it.b = number();
      if (peek() == 's') {
        ++pos_;
        it.stride = number();
      }
      if (peek() == 'p') {
        ++pos_;
        it.padding = number();
      }
    } else {
      it.kind = Item::Kind::fc;
    }
    return it;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
  std::size_t col0_;
};

// Turns parsed items into resolved LayerShapes, tracking the running
// feature-map geometry.
class NetworkBuilder {
 public:
  NetworkBuilder(NetworkConfig& net, std::int64_t d1, std::int64_t d2)
      : net_(net), d1_(d1), d2_(d2), c_(net.in_c), h_(net.in_h), w_(net.in_w) {}

  void add(const LayerListParser::Item& it, std::size_t line) {
    using K = LayerListParser::Item::Kind;
    switch (it.kind) {
      case K::group:
        for (std::size_t r = 0; r < it.repeat; ++r)
          for (const auto& ch : it.children) add(ch, line);
        return;
      case K::conv: {
        LayerShape l = base(LayerKind::conv, it.a, it.b, it.b);
        l.stride = it.stride;
        l.padding = it.padding.value_or(it.b / 2);
        push(l, line, it.column);
        return;
      }
      case K::max_pool: {
        if (it.a == 0) throw ParseError("pool size must be positive", line, it.column);
        LayerShape l = base(LayerKind::max_pool, c_, it.a, it.a);
        l.stride = it.a;
        l.padding = 0;
        if (h_ % it.a != 0 || w_ % it.a != 0)
          throw ShapeError(l.name, "feature map not divisible by pool size");
        net_.layers.push_back(l);
        h_ /= it.a;
        w_ /= it.a;
        return;
      }
      case K::avg_pool: {
        LayerShape l = base(LayerKind::avg_pool, c_, h_, w_);
        l.stride = 1;
        net_.layers.push_back(l);
        h_ = w_ = 1;
        return;
      }
      case K::fc: {
        LayerShape l = base(LayerKind::linear, it.a, 1, 1);
        l.C_i = c_ * h_ * w_;
        l.F_h = l.F_w = 1;
        push(l, line, it.column);
        return;
      }
      case K::attn: {
        const std::size_t heads = it.a, dim = it.b;
        const std::string name = "attn" + std::to_string(net_.attention_blocks.size());
        if (heads == 0 || dim == 0)
          throw ShapeError(name, "heads and head width must be positive");
        if (heads * dim != c_)
          throw ShapeError(name, "heads x head width (" +
                                     std::to_string(heads * dim) +
                                     ") must equal the feeding layer's channels (" +
                                     std::to_string(c_) + ")");
        AttentionBlock blk;
        blk.heads = heads;
        blk.head_dim = dim;
        blk.seq_len = h_ * w_;
        blk.delta1 = d1_;
        blk.delta2 = d2_;
        blk.first_layer = net_.layers.size();
        const std::size_t idx = net_.attention_blocks.size();
        for (ProjRole role : {ProjRole::query, ProjRole::key, ProjRole::value,
                              ProjRole::output}) {
          LayerShape l = base(LayerKind::attention_proj, c_, 1, 1);
          l.block = idx;
          l.role = role;
          net_.layers.push_back(l);
        }
        net_.attention_blocks.push_back(blk);
        return;
      }
    }
  }

 private:
  LayerShape base(LayerKind kind, std::size_t c_out, std::size_t kh,
                  std::size_t kw) const {
    LayerShape l;
    l.name = "L" + std::to_string(net_.layers.size());
    l.kind = kind;
    l.T_s = net_.timesteps;
    l.F_h = h_;
    l.F_w = w_;
    l.C_i = c_;
    l.C_o = c_out;
    l.K_h = kh;
    l.K_w = kw;
    return l;
  }

  void push(LayerShape& l, std::size_t line, std::size_t column) {
    if (l.C_o == 0 || l.K_h == 0)
      throw ParseError("channel count and kernel size must be positive", line,
                       column);
    l.validate();
    net_.layers.push_back(l);
    c_ = l.C_o;
    h_ = l.out_h();
    w_ = l.out_w();
  }

  NetworkConfig& net_;
  std::int64_t d1_, d2_;
  std::size_t c_, h_, w_;
};

template <typename T>
T parse_number(const std::string& v, std::size_t line, std::size_t col) {
  T out{};
  const char* b = v.data();
  const char* e = v.data() + v.size();
  std::from_chars_result r;
  if constexpr (std::is_integral_v<T>) {
    if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X'))
      r = std::from_chars(b + 2, e, out, 16);
    else
      r = std::from_chars(b, e, out);
  } else {
    r = std::from_chars(b, e, out);
  }
  if (r.ec != std::errc{} || r.ptr != e)
    throw ParseError("invalid number '" + v + "'", line, col);
  return out;
}

}  // namespace detail

// Key/value view of a config document, with 1-based line/column positions.
struct ConfigDocument {
  struct Entry {
    std::string value;
    std::size_t line = 0;
    std::size_t value_column = 0;
  };
  std::map<std::string, Entry> entries;

  static ConfigDocument parse(std::string_view text) {
    ConfigDocument doc;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos)
        line = line.substr(0, hash);
      if (!detail::trim(line).empty()) {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
          throw ParseError("expected 'key = value'", line_no, 1);
        std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("empty key", line_no, 1);
        std::string_view rest = line.substr(eq + 1);
        const auto lead = rest.find_first_not_of(" \t");
        const std::size_t vcol =
            eq + 2 + (lead == std::string_view::npos ? 0 : lead);
        std::string value = detail::trim(rest);
        if (value.empty()) throw ParseError("empty value for '" + key + "'", line_no, vcol);
        if (doc.entries.count(key))
          throw ParseError("duplicate key '" + key + "'", line_no, 1);
        doc.entries[key] = Entry{value, line_no, vcol};
      }
      if (end == text.size()) break;
      start = end + 1;
    }
    return doc;
  }

  const Entry* find(const std::string& key) const {
    auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    return detail::parse_number<T>(e->value, e->line, e->value_column);
  }
};

// Parses a full network document. Unknown keys outside the `hw.` namespace
// are rejected so typos do not silently fall back to defaults.
inline NetworkConfig parse_network_config(std::string_view text) {
  const ConfigDocument doc = ConfigDocument::parse(text);
  static const char* kKnown[] = {"name",      "timesteps",  "layers",
                                 "sparsity",  "seed",       "threshold1",
                                 "threshold2", "sparsity.profile"};
  for (const auto& [key, e] : doc.entries) {
    bool ok = key.rfind("hw.", 0) == 0;
    for (const char* k : kKnown) ok = ok || key == k;
    if (!ok) throw ParseError("unknown key '" + key + "'", e.line, 1);
  }

  NetworkConfig net;
  if (const auto* e = doc.find("name")) net.name = e->value;
  net.timesteps = doc.get<std::size_t>("timesteps", 1);
  if (net.timesteps == 0) {
    const auto* e = doc.find("timesteps");
    throw ParseError("timesteps must be positive", e->line, e->value_column);
  }
  net.sparsity.rate = doc.get<double>("sparsity", 0.75);
  net.sparsity.seed = doc.get<std::uint64_t>("seed", 1);
  if (const auto* e = doc.find("sparsity.profile")) {
    net.sparsity.kind = SparsityKind::per_layer_profile;
    std::stringstream ss(e->value);
    std::string tok;
    while (std::getline(ss, tok, ','))
      net.sparsity.layer_rates.push_back(
          detail::parse_number<double>(detail::trim(tok), e->line, e->value_column));
  }
  try {
    net.sparsity.validate();
  } catch (const ConfigError& err) {
    const auto* e = doc.find("sparsity");
    if (!e) e = doc.find("sparsity.profile");
    throw ParseError(err.what(), e ? e->line : 0, e ? e->value_column : 0);
  }
  const auto d1 = doc.get<std::int64_t>("threshold1", 1);
  const auto d2 = doc.get<std::int64_t>("threshold2", 1);

  const auto* layers = doc.find("layers");
  if (!layers) throw ParseError("missing 'layers' key", 1, 1);
  detail::LayerListParser p(layers->value, layers->line, layers->value_column);
  const auto parsed = p.parse();
  net.in_c = parsed.c;
  net.in_h = parsed.h;
  net.in_w = parsed.w;
  if (net.in_c == 0 || net.in_h == 0 || net.in_w == 0)
    throw ParseError("input dimensions must be positive", layers->line,
                     layers->value_column);
  detail::NetworkBuilder builder(net, d1, d2);
  for (const auto& it : parsed.items) builder.add(it, layers->line);
  return net;
}

// Reads `hw.*` keys over a base configuration.
inline ParallelismConfig parse_parallelism(std::string_view text,
                                           ParallelismConfig base = {}) {
  const ConfigDocument doc = ConfigDocument::parse(text);
  auto rd = [&](const char* k, std::size_t& dst) {
    dst = doc.get<std::size_t>(std::string("hw.") + k, dst);
  };
  rd("P_Ts", base.P_Ts);
  rd("P_Fx", base.P_Fx);
  rd("P_Ci", base.P_Ci);
  rd("P_Co", base.P_Co);
  rd("P_Wo", base.P_Wo);
  rd("M", base.M);
  rd("B_m", base.B_m);
  rd("P_Bm", base.P_Bm);
  rd("P_Bn", base.P_Bn);
  rd("P_Bk", base.P_Bk);
  rd("lanes_per_dsp", base.lanes_per_dsp);
  base.validate();
  return base;
}

// Emits a document that re-parses to an equal NetworkConfig.
inline std::string serialize(const NetworkConfig& net) {
  std::ostringstream os;
  os.precision(17);
  if (!net.name.empty()) os << "name = " << net.name << "\n";
  os << "timesteps = " << net.timesteps << "\n";
  os << "sparsity = " << net.sparsity.rate << "\n";
  if (net.sparsity.kind == SparsityKind::per_layer_profile) {
    os << "sparsity.profile = ";
    for (std::size_t i = 0; i < net.sparsity.layer_rates.size(); ++i)
      os << (i ? ", " : "") << net.sparsity.layer_rates[i];
    os << "\n";
  }
  os << "seed = " << net.sparsity.seed << "\n";
  const std::int64_t d1 = net.attention_blocks.empty() ? 1 : net.attention_blocks[0].delta1;
  const std::int64_t d2 = net.attention_blocks.empty() ? 1 : net.attention_blocks[0].delta2;
  os << "threshold1 = " << d1 << "\n";
  os << "threshold2 = " << d2 << "\n";
  os << "layers = " << net.in_c << "x" << net.in_h << "x" << net.in_w;
  for (const auto& l : net.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        os << "-" << l.C_o << "c" << l.K_h << "s" << l.stride << "p" << l.padding;
        break;
      case LayerKind::max_pool: os << "-mp" << l.K_h; break;
      case LayerKind::avg_pool: os << "-ap"; break;
      case LayerKind::linear: os << "-fc" << l.C_o; break;
      case LayerKind::attention_proj:
        if (l.role == ProjRole::query) {
          const auto& b = net.attention_blocks.at(*l.block);
          os << "-attn(" << b.heads << "," << b.head_dim << ")";
        }
        break;
    }
  }
  os << "\n";
  return os.str();
}

}  // namespace dualsim
