// dualsim command-line frontend.
//
// Exit codes: 0 ok, 1 a check failed, 2 usage or config error, 3 I/O error.
// DUALSIM_OUTPUT_DIR sets the directory for default artifact paths.

#include <bit>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dualsim/dualsim.hpp"

using json = nlohmann::json;
using namespace dualsim;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kIo = 3 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string output;
  std::string format = "json";
};

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::filesystem::path default_path(const std::string& stem, const std::string& ext) {
  const char* dir = std::getenv("DUALSIM_OUTPUT_DIR");
  return std::filesystem::path(dir && *dir ? dir : ".") / (stem + "." + ext);
}

// Writes to the given path, or to stdout when the path is "-".
void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(p);
  if (!f || !(f << text)) throw IoError("cannot write " + path);
}

std::string artifact_path(const Common& c, const std::string& stem) {
  return c.output.empty() ? default_path(stem, c.format).string() : c.output;
}

std::string index_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

json rows_json(const std::vector<SweepRow>& rows) {
  json a = json::array();
  for (const auto& r : rows)
    a.push_back({{"kind", r.kind},     {"G", r.G},           {"M", r.M},
                 {"P_Wo", r.P_Wo},     {"P_Ci", r.P_Ci},     {"B_m", r.B_m},
                 {"PTsPFx", r.PTsPFx}, {"seeds", r.seed_count}, {"D_mean", r.D_mean},
                 {"D_std", r.D_std},   {"R", r.R},           {"F", r.F},
                 {"F_norm", r.F_norm}, {"D_per_seed", r.D_per_seed}});
  return a;
}

std::string format_rows(const Common& c, const std::vector<SweepRow>& rows) {
  if (c.format == "json") return rows_json(rows).dump(2) + "\n";
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

double mean_R(const std::vector<SweepRow>& rows, const std::string& kind, std::size_t ng) {
  for (const auto& r : rows)
    if (r.kind == kind && r.PTsPFx == ng) return r.R;
  return 0.0;
}

SweepRow find_row(const std::vector<SweepRow>& rows, const std::string& kind, std::size_t bm) {
  for (const auto& r : rows)
    if (r.kind == kind && r.B_m == bm) return r;
  return {};
}

struct NetAndHw {
  NetworkConfig net;
  ParallelismConfig cfg;
};

NetAndHw load_net(const std::string& path) {
  if (path.empty()) throw CLI::RequiredError("--config");
  const std::string text = read_file(path);
  return {parse_network_config(text), parse_parallelism(text)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-engine sparse spiking-transformer accelerator simulator"};
  app.require_subcommand(1);
  Common c;

  auto add_common = [&](CLI::App* sub, bool config) {
    if (config) sub->add_option("--config,--net", c.config, "Network config file");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { c.seed = s, c.seed_set = true; }, "Base seed");
    sub->add_option("--output,-o", c.output, "Artifact path, '-' for stdout");
    sub->add_option("--format", c.format, "Artifact format")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  // decode
  std::uint64_t bits = 0;
  std::size_t width = 16, lanes = 4;
  auto* decode = app.add_subcommand("decode", "Decode one bitmap with the M-lane decoder");
  decode->add_option("--bits", bits, "Bitmap value, LSB = position 0")->required();
  decode->add_option("--width", width, "Bitmap width")->check(CLI::Range(1, 64));
  decode->add_option("--lanes,-M", lanes, "Decoder lanes")->check(CLI::Range(1, 64));
  add_common(decode, false);

  // sweeps
  MetricConfig m;
  std::size_t seeds = m.seeds, threads = 0;
  auto add_sweep = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--seeds", seeds, "Seeds per point")->check(CLI::PositiveNumber);
    s->add_option("--threads", threads, "Worker threads, 0 = all cores");
    s->add_option("--sparsity", m.sparsity, "Zero-bit probability")->check(CLI::Range(0.0, 1.0));
    s->add_option("--lambda", m.lambda, "Area exponent of F");
    s->add_option("--channels", m.channels, "Input channels of the sweep layer (0: size from --min-chunks)");
    s->add_option("--min-chunks", m.min_chunks, "Chunks per grid point when --channels is 0")
        ->check(CLI::PositiveNumber);
    add_common(s, false);
    return s;
  };
  auto* sweep_pci_cmd = add_sweep("sweep-pci", "Efficiency vs P_Ci for each throughput G");
  sweep_pci_cmd->add_option("--G", m.G_list, "Throughputs");
  sweep_pci_cmd->add_option("--pci", m.pci_grid, "P_Ci grid");
  sweep_pci_cmd->add_option("--grid-points", m.pci_grid_points, "P_Ts x P_Fx");
  auto* sweep_workers_cmd = add_sweep("sweep-workers", "Performance vs worker count");
  sweep_workers_cmd->add_option("--G", m.worker_G, "Throughputs");
  sweep_workers_cmd->add_option("--pwo", m.pwo_grid, "Worker counts");
  sweep_workers_cmd->add_option("--grid-points", m.worker_grid_points, "P_Ts x P_Fx");
  auto* sweep_banks_cmd = add_sweep("sweep-banks", "Unified vs crossbar over bank count");
  sweep_banks_cmd->add_option("--bm", m.bm_grid, "Bank counts");
  sweep_banks_cmd->add_option("--grid-points", m.bank_grid_points, "P_Ts x P_Fx");
  auto* scale_cmd = add_sweep("scale", "Unified vs crossbar over grid size");
  scale_cmd->add_option("--grid", m.scale_grid, "P_Ts x P_Fx values");
  scale_cmd->add_option("--crossbar-banks", m.scale_crossbar_banks, "Crossbar B_m");

  // popcount-cost
  std::size_t pc_width = 18, pc_trials = 100000;
  auto* popc = app.add_subcommand("popcount-cost", "LUT6 cost of AND-PopCount networks");
  popc->add_option("--width", pc_width, "Operand width")->check(CLI::Range(1, 64));
  popc->add_option("--trials", pc_trials, "Random equivalence trials");
  add_common(popc, false);

  // transpose-check
  std::size_t tL = 4, td = 2, tT = 2;
  auto* tr = app.add_subcommand("transpose-check", "Byte transpose memory vs oracle");
  tr->add_option("--L", tL, "Sequence length")->check(CLI::PositiveNumber);
  tr->add_option("--d", td, "Head width")->check(CLI::PositiveNumber);
  tr->add_option("--T", tT, "Timesteps")->check(CLI::PositiveNumber);
  add_common(tr, false);

  // orchestrate-check
  LayerShape ol;
  ol.name = "orchestrate-check";
  ol.T_s = 2, ol.F_h = 4, ol.F_w = 8, ol.C_i = 32, ol.K_h = ol.K_w = 3, ol.padding = 1;
  ParallelismConfig ocfg;
  ocfg.P_Ts = 1, ocfg.P_Fx = 4, ocfg.P_Ci = 16, ocfg.M = 1;  // lanes play no part in im2col
  double o_density = 0.25;
  auto* orc = app.add_subcommand("orchestrate-check", "im2col stream vs reference");
  orc->add_option("--T", ol.T_s)->check(CLI::PositiveNumber);
  orc->add_option("--H", ol.F_h)->check(CLI::PositiveNumber);
  orc->add_option("--W", ol.F_w)->check(CLI::PositiveNumber);
  orc->add_option("--C", ol.C_i)->check(CLI::PositiveNumber);
  orc->add_option("--K", ol.K_h)->check(CLI::PositiveNumber);
  orc->add_option("--stride", ol.stride)->check(CLI::PositiveNumber);
  orc->add_option("--pad", ol.padding);
  orc->add_option("--pts", ocfg.P_Ts)->check(CLI::PositiveNumber);
  orc->add_option("--pfx", ocfg.P_Fx)->check(CLI::PositiveNumber);
  orc->add_option("--pci", ocfg.P_Ci)->check(CLI::PositiveNumber);
  orc->add_option("--density", o_density)->check(CLI::Range(0.0, 1.0));
  add_common(orc, false);

  // pipeline, end-to-end
  std::size_t fill = 0, tiles = 4;
  double sparsity_override = -1;
  auto* pipe = app.add_subcommand("pipeline", "Latency-hiding schedule of each attention block");
  add_common(pipe, true);
  pipe->add_option("--sparsity", sparsity_override)->check(CLI::Range(0.0, 1.0));
  pipe->add_option("--tiles", tiles, "Tiles simulated per layer")->check(CLI::PositiveNumber);
  auto* e2e = app.add_subcommand("end-to-end", "Per-layer cycle report for a network");
  add_common(e2e, true);
  e2e->add_option("--sparsity", sparsity_override)->check(CLI::Range(0.0, 1.0));
  e2e->add_option("--fill", fill, "Per-layer fill cycles");
  e2e->add_option("--tiles", tiles, "Tiles simulated per layer")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (decode->parsed()) {
      if (width < 64 && (bits >> width) != 0)
        throw ConfigError("--bits has set bits above --width");
      const auto b = SpikeBitmap::from_u64(bits, width);
      const auto r = decode_stream({b}, lanes);
      std::vector<std::size_t> all;
      json cyc = json::array();
      for (const auto& t : r.trace) {
        cyc.push_back(t.positions);
        all.insert(all.end(), t.positions.begin(), t.positions.end());
      }
      const bool ok = all == oracle_decode(b);
      std::cout << "decode " << b.to_hex() << " M=" << lanes << ": " << r.cycles
                << (r.cycles == 1 ? " cycle" : " cycles") << ", indices " << index_list(all)
                << (ok ? "" : " (ORACLE MISMATCH)") << "\n";
      if (!c.output.empty())
        emit(c.output, json{{"bits", bits}, {"width", width}, {"lanes", lanes},
                            {"cycles", r.cycles}, {"per_cycle", cyc}, {"indices", all},
                            {"oracle_match", ok}}
                           .dump(2) + "\n");
      return ok ? kOk : kCheckFailed;
    }

    m.seeds = seeds;
    m.threads = threads;
    m.seed_base = c.seed;
    if (sweep_pci_cmd->parsed()) {
      const auto rows = sweep_pci(m);
      const auto path = artifact_path(c, "sweep-pci");
      emit(path, format_rows(c, rows));
      std::cout << "sweep-pci: argmax P_Ci";
      for (std::size_t G : m.G_list) {
        try {
          std::cout << " G=" << G << ":" << argmax_pci(rows, G);
        } catch (const ConfigError&) {
          std::cout << " G=" << G << ":-";
        }
      }
      std::cout << " -> " << path << "\n";
      return kOk;
    }
    if (sweep_workers_cmd->parsed()) {
      const auto rows = sweep_workers(m);
      const auto path = artifact_path(c, "sweep-workers");
      emit(path, format_rows(c, rows));
      std::cout << "sweep-workers: R(P_Wo=2)/max R";
      for (std::size_t G : m.worker_G) {
        double best = 0, two = 0;
        for (const auto& r : rows)
          if (r.G == G) {
            best = std::max(best, r.R);
            if (r.P_Wo == 2) two = r.R;
          }
        std::cout << " G=" << G << ":" << (best > 0 ? two / best : 0.0);
      }
      std::cout << " -> " << path << "\n";
      return kOk;
    }
    if (sweep_banks_cmd->parsed()) {
      const auto rows = sweep_banks(m);
      const auto path = artifact_path(c, "sweep-banks");
      emit(path, format_rows(c, rows));
      const auto u = find_row(rows, "banks_unified", 1);
      const auto x = find_row(rows, "banks_crossbar", 1);
      std::cout << "sweep-banks: unified/crossbar speedup at B_m=1 "
                << (u.D_mean > 0 ? x.D_mean / u.D_mean : 0.0) << " -> " << path << "\n";
      return kOk;
    }
    if (scale_cmd->parsed()) {
      const auto rows = sweep_scaling(m);
      const auto path = artifact_path(c, "scale");
      emit(path, format_rows(c, rows));
      const std::size_t lo = m.scale_grid.front(), hi = m.scale_grid.back();
      auto deg = [&](const std::string& k) {
        const double a = mean_R(rows, k, lo), b = mean_R(rows, k, hi);
        return a > 0 ? 1.0 - b / a : 0.0;
      };
      std::cout << "scale: R degradation " << lo << "->" << hi << " unified "
                << deg("scale_unified") << " crossbar " << deg("scale_crossbar") << " -> "
                << path << "\n";
      return kOk;
    }

    if (popc->parsed()) {
      const auto v = build_vanilla_popcount(pc_width);
      const auto o = build_optimized_popcount(pc_width);
      std::mt19937_64 rng(c.seed);
      std::size_t bad = 0, checked = 0;
      const bool exhaustive = pc_width <= 8;
      const std::uint64_t mask = pc_width == 64 ? ~0ULL : (1ULL << pc_width) - 1;
      auto check = [&](std::uint64_t a, std::uint64_t b) {
        const auto A = SpikeBitmap::from_u64(a, pc_width), B = SpikeBitmap::from_u64(b, pc_width);
        const std::uint64_t want = static_cast<std::uint64_t>(std::popcount(a & b));
        bad += (v.evaluate(A, B) != want) + (o.evaluate(A, B) != want);
        ++checked;
      };
      if (exhaustive) {
        for (std::uint64_t a = 0; a <= mask; ++a)
          for (std::uint64_t b = 0; b <= mask; ++b) check(a, b);
      } else {
        for (std::size_t i = 0; i < pc_trials; ++i) check(rng() & mask, rng() & mask);
      }
      auto cj = [](const CircuitCost& k) {
        return json{{"lut6", k.lut6_count}, {"lut6_gate_rule", k.lut6_gate_rule},
                    {"depth", k.depth}, {"cpa_lut6", k.cpa_luts}};
      };
      const auto cv = v.cost(), co = o.cost();
      const double red = 1.0 - static_cast<double>(co.lut6_count) / static_cast<double>(cv.lut6_count);
      const json out{{"width", pc_width},
                     {"vanilla", cj(cv)},
                     {"optimized", cj(co)},
                     {"lut6_reduction", red},
                     {"equivalence", {{"pairs", checked}, {"exhaustive", exhaustive}, {"mismatches", bad}}}};
      std::cout << out.dump(2) << "\n";
      if (!c.output.empty()) emit(c.output, out.dump(2) + "\n");
      return bad == 0 ? kOk : kCheckFailed;
    }

    if (tr->parsed()) {
      std::mt19937_64 rng(c.seed);
      std::vector<std::uint8_t> in(tL * td * tT);
      for (std::size_t i = 0; i < in.size(); ++i)
        in[i] = c.seed_set ? static_cast<std::uint8_t>(rng()) : static_cast<std::uint8_t>(i);
      bool ok = true;
      std::string why;
      TransposeResult r;
      try {
        r = transpose_frame(in, tL, td, tT);
        ok = r.out == reference_transpose(in, tL, td, tT);
        if (!ok) why = "output differs from oracle";
      } catch (const PortViolation& e) {
        ok = false;
        why = e.what();
      }
      std::cout << "transpose-check L=" << tL << " d=" << td << " T=" << tT << ": "
                << (ok ? "pass" : "FAIL " + why) << " (" << r.push_cycles << " push, "
                << r.pop_cycles << " pop cycles)\n";
      return ok ? kOk : kCheckFailed;
    }

    if (orc->parsed()) {
      ol.K_w = ol.K_h;
      ol.C_o = 1;
      ol.validate();
      ocfg.validate();
      FeatureMap fm(ol.T_s, ol.F_h, ol.F_w, ol.C_i);
      std::mt19937_64 rng(c.seed);
      std::bernoulli_distribution bit(o_density);
      for (std::size_t t = 0; t < ol.T_s; ++t)
        for (std::size_t h = 0; h < ol.F_h; ++h)
          for (std::size_t w = 0; w < ol.F_w; ++w)
            for (std::size_t ch = 0; ch < ol.C_i; ++ch) fm.set(t, h, w, ch, bit(rng));
      bool ok = true;
      std::string why;
      OrchestratorReport r;
      try {
        r = pop_stream(fm, ol, ocfg);
        if (r.stream != reference_im2col(fm, ol, ocfg)) ok = false, why = "stream differs from reference";
        if (r.pop_stalls != 0) ok = false, why = "pop stalls";
      } catch (const PortViolation& e) {
        ok = false;
        why = e.what();
      }
      std::cout << "orchestrate-check: " << (ok ? "pass" : "FAIL " + why) << " (" << r.stream.size()
                << " vectors, " << r.total_cycles << " cycles, fill " << r.fill_cycles
                << ", stalls " << r.pop_stalls << ")\n";
      return ok ? kOk : kCheckFailed;
    }

    if (pipe->parsed() || e2e->parsed()) {
      auto [net, cfg] = load_net(c.config);
      SparsityModel sp = net.sparsity;
      if (c.seed_set) sp.seed = c.seed;
      if (sparsity_override >= 0) sp.kind = SparsityKind::bernoulli, sp.rate = sparsity_override;
      EndToEndOptions opt;
      opt.fill_cycles = fill;
      opt.max_sampled_tiles = tiles;
      const auto rep = end_to_end(net, cfg, sp, opt);
      if (pipe->parsed()) {
        if (rep.attention.empty()) throw ConfigError("network has no attention blocks");
        json blocks = json::array();
        bool ok = true;
        std::uint64_t total = 0, exposed = 0, sparse = 0;
        for (const auto& s : rep.attention) {
          try {
            check_schedule(s);
          } catch (const std::logic_error&) {
            ok = false;
          }
          json entries = json::array();
          for (const auto& e : s.entries)
            entries.push_back({{"engine", e.engine == Engine::sparse ? "sparse" : "binary"},
                               {"op", to_string(e.op)}, {"head", e.head},
                               {"start", e.start}, {"end", e.end}});
          blocks.push_back({{"entries", entries}, {"total_cycles", s.total_cycles},
                            {"exposed_binary_cycles", s.exposed_binary_cycles},
                            {"utilization", s.utilization_sparse()}});
          total += s.total_cycles;
          exposed += s.exposed_binary_cycles;
          sparse += s.sparse_cycles;
        }
        c.format = "json";
        const auto path = artifact_path(c, "pipeline");
        emit(path, json{{"network", net.name}, {"blocks", blocks}}.dump(2) + "\n");
        std::cout << "pipeline " << net.name << ": total " << total << " exposed " << exposed
                  << " utilization " << (total ? static_cast<double>(sparse) / total : 0.0)
                  << (ok ? "" : " (SCHEDULE INVALID)") << " -> " << path << "\n";
        return ok ? kOk : kCheckFailed;
      }
      std::string text;
      if (c.format == "json") {
        json layers = json::array();
        for (const auto& l : rep.layers)
          layers.push_back({{"name", l.name}, {"kind", to_string(l.kind)},
                            {"orchestrator", l.orchestrator_cycles}, {"sparse", l.sparse_cycles},
                            {"binary", l.binary_cycles}, {"exposed_binary", l.exposed_binary_cycles},
                            {"total", l.total_cycles}});
        text = json{{"network", net.name}, {"sparsity", sp.rate}, {"layers", layers},
                    {"total_cycles", rep.total_cycles}}
                   .dump(2) + "\n";
      } else {
        std::ostringstream os;
        os << "name,kind,orchestrator,sparse,binary,exposed_binary,total\n";
        for (const auto& l : rep.layers)
          os << l.name << ',' << to_string(l.kind) << ',' << l.orchestrator_cycles << ','
             << l.sparse_cycles << ',' << l.binary_cycles << ',' << l.exposed_binary_cycles << ','
             << l.total_cycles << "\n";
        text = os.str();
      }
      const auto path = artifact_path(c, "end-to-end");
      emit(path, text);
      std::cout << "end-to-end " << net.name << ": " << rep.total_cycles << " cycles over "
                << rep.layers.size() << " layers -> " << path << "\n";
      return kOk;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << (c.config.empty() ? "" : c.config + ": ") << e.what() << "\n";
    return kUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
