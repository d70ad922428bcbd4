// experiments.hpp
//
// Composite metric, DSP ledger, and the sweep harness behind the P_Ci,
// worker, bank and spatial-temporal scaling studies.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dualsim/config.hpp"
#include "dualsim/errors.hpp"
#include "dualsim/load_balancer.hpp"
#include "dualsim/workload.hpp"

namespace dualsim {

struct Metric {
  double R = 0.0, eta = 0.0, F = 0.0;
};

// R = 1/D, eta = R / (lambda P_Ci), F = eta R.
inline Metric metric_F(double D, std::size_t P_Ci, double lambda = 1.0) {
  if (!(D > 0.0)) throw ConfigError("metric_F needs D > 0");
  if (!(lambda > 0.0) || P_Ci == 0) throw ConfigError("metric_F needs lambda > 0, P_Ci > 0");
  Metric m;
  m.R = 1.0 / D;
  m.eta = m.R / (lambda * static_cast<double>(P_Ci));
  m.F = m.eta * m.R;
  return m;
}

inline constexpr std::size_t kLutsPerDsp = 86;

struct ResourceEstimate {
  std::size_t dsp_dense = 0;
  std::size_t dsp_sparse = 0;
  std::size_t dsp_saved = 0;
  std::size_t lut_equivalent_saved = 0;  // dsp_saved * 86
  std::size_t lut_overhead = 0;          // decoder + balancer LUTs, caller supplied
  std::size_t dsp_binary = 0;            // ceil(P_Bm * P_Bn / lanes_per_dsp)
};

inline ResourceEstimate dsp_savings(std::size_t G, std::size_t P_Ci, std::size_t dense_base,
                                    const ParallelismConfig& cfg = {},
                                    std::size_t lut_overhead = 0) {
  if (G == 0 || P_Ci == 0) throw ConfigError("dsp_savings needs G, P_Ci >= 1");
  if (G > P_Ci) throw ConfigError("dsp_savings needs G <= P_Ci");
  ResourceEstimate r;
  r.dsp_dense = dense_base;
  r.dsp_saved = dense_base * (P_Ci - G) / P_Ci;
  r.dsp_sparse = dense_base - r.dsp_saved;
  r.lut_equivalent_saved = r.dsp_saved * kLutsPerDsp;
  r.lut_overhead = lut_overhead;
  r.dsp_binary = (cfg.P_Bm * cfg.P_Bn + cfg.lanes_per_dsp - 1) / cfg.lanes_per_dsp;
  return r;
}

struct MetricConfig {
  double lambda = 1.0;
  double sparsity = 0.75;
  std::size_t seeds = 32;
  std::uint64_t seed_base = 1;
  std::size_t kernel = 3;
  std::size_t channels = 256;    // fixed C_i for every sweep; 0 sizes C_i from min_chunks
  std::size_t min_chunks = 512;  // per grid point, when channels == 0
  std::size_t threads = 0;       // 0: hardware concurrency

  std::vector<std::size_t> G_list{2, 4, 8, 16};
  std::vector<std::size_t> pci_grid{2, 4, 8, 16, 32, 64, 128};
  std::size_t pci_workers = 2;       // P_Wo in the P_Ci sweep (capped at G)
  std::size_t pci_grid_points = 1;   // decoder studies run on one grid point

  std::vector<std::size_t> worker_G{4, 8};
  std::vector<std::size_t> pwo_grid{1, 2, 4, 8};
  std::size_t worker_grid_points = 1;

  std::size_t bank_G = 4, bank_workers = 2, bank_P_Ci = 16, bank_grid_points = 16;
  std::vector<std::size_t> bm_grid{1, 2, 4, 6, 8, 12, 16};

  std::vector<std::size_t> scale_grid{1, 2, 4, 8, 16, 32, 64, 128};
  std::size_t scale_crossbar_banks = 8;
};

struct SweepRow {
  std::string kind;
  std::size_t G = 0, M = 0, P_Wo = 0, P_Ci = 0, B_m = 1, PTsPFx = 1, seed_count = 0;
  double D_mean = 0, D_std = 0, R = 0, F = 0, F_norm = 0;
  std::vector<double> D_per_seed;
};

inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) body(i);
    });
  for (auto& th : pool) th.join();
}

// Input channels giving >= min_chunks chunks of P_Ci bits per K x K window.
inline std::size_t sweep_channels(const MetricConfig& m, std::size_t P_Ci) {
  const std::size_t kk = m.kernel * m.kernel;
  return (m.min_chunks + kk - 1) / kk * P_Ci;
}

namespace detail {

struct Job {
  SweepRow row;
  ParallelismConfig cfg;
  bool crossbar = false;
  std::size_t chunks_per_word = 1;
  std::size_t channels = 0;
};

inline void run_jobs(std::vector<Job>& jobs, const MetricConfig& m) {
  const std::size_t per = m.seeds;
  std::vector<double> D(jobs.size() * per);
  parallel_for(jobs.size() * per, m.threads, [&](std::size_t k) {
    const Job& j = jobs[k / per];
    const std::uint64_t seed = m.seed_base + k % per;
    const auto w = synthetic_workload(m.kernel, m.channels ? m.channels : j.channels, m.sparsity,
                                      seed, j.cfg);
    std::size_t d;
    if (j.crossbar) {
      CrossbarModel xb{j.row.B_m, j.cfg.P_Ci, j.cfg.G()};
      d = simulate_crossbar(w, xb).D;
    } else {
      if (j.chunks_per_word > 1)
        check_bandwidth_parity(j.chunks_per_word * j.cfg.P_Ci,
                               CrossbarModel{j.chunks_per_word, j.cfg.P_Ci, j.cfg.G()});
      d = simulate_unified(w, j.cfg, UnifiedOptions{j.chunks_per_word, 0, false}).D;
    }
    D[k] = static_cast<double>(d);
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& r = jobs[i].row;
    r.seed_count = per;
    r.D_per_seed.assign(D.begin() + static_cast<std::ptrdiff_t>(i * per),
                        D.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    double s = 0, sq = 0, R = 0, F = 0;
    for (double d : r.D_per_seed) {
      s += d;
      sq += d * d;
      const Metric mt = metric_F(d, r.P_Ci, m.lambda);
      R += mt.R;
      F += mt.F;
    }
    const double n = static_cast<double>(per);
    r.D_mean = s / n;
    r.D_std = std::sqrt(std::max(0.0, sq / n - r.D_mean * r.D_mean));
    r.R = R / n;
    r.F = F / n;
  }
}

// F_norm: F over the maximum F among rows sharing (kind, G).
inline std::vector<SweepRow> finish(std::vector<Job>& jobs) {
  std::map<std::pair<std::string, std::size_t>, double> best;
  for (const auto& j : jobs) {
    auto& b = best[{j.row.kind, j.row.G}];
    b = std::max(b, j.row.F);
  }
  std::vector<SweepRow> rows;
  for (auto& j : jobs) {
    j.row.F_norm = j.row.F / best[{j.row.kind, j.row.G}];
    rows.push_back(std::move(j.row));
  }
  return rows;
}

inline Job make_job(std::string kind, std::size_t G, std::size_t P_Wo, std::size_t P_Ci,
                    std::size_t grid_points, std::size_t B_m, bool crossbar,
                    std::size_t chunks_per_word) {
  Job j;
  j.cfg.P_Ts = 1;
  j.cfg.P_Fx = grid_points;
  j.cfg.P_Ci = P_Ci;
  j.cfg.P_Wo = P_Wo;
  j.cfg.M = G / P_Wo;
  j.cfg.B_m = B_m;
  j.cfg.validate();
  j.row.kind = std::move(kind);
  j.row.G = G;
  j.row.M = j.cfg.M;
  j.row.P_Wo = P_Wo;
  j.row.P_Ci = P_Ci;
  j.row.B_m = B_m;
  j.row.PTsPFx = grid_points;
  j.crossbar = crossbar;
  j.chunks_per_word = chunks_per_word;
  return j;
}

}  // namespace detail

// One workload per seed across the whole P_Ci grid, sized for the widest P_Ci.
inline std::vector<SweepRow> sweep_pci(const MetricConfig& m) {
  std::vector<detail::Job> jobs;
  const std::size_t channels =
      sweep_channels(m, *std::max_element(m.pci_grid.begin(), m.pci_grid.end()));
  for (std::size_t G : m.G_list) {
    const std::size_t pwo = std::min(m.pci_workers, G);
    for (std::size_t pci : m.pci_grid) {
      if (pci % (G / pwo) != 0 || pci < G) continue;
      jobs.push_back(detail::make_job("pci", G, pwo, pci, m.pci_grid_points, 1, false, 1));
      jobs.back().channels = channels;
    }
  }
  for (auto& j : jobs)
    if (j.channels == 0) j.channels = sweep_channels(m, j.cfg.P_Ci);
  detail::run_jobs(jobs, m);
  return detail::finish(jobs);
}

// P_Ci = 4G, the optimum predicted by G / (1 - 0.75).
inline std::vector<SweepRow> sweep_workers(const MetricConfig& m) {
  std::vector<detail::Job> jobs;
  for (std::size_t G : m.worker_G)
    for (std::size_t pwo : m.pwo_grid) {
      if (pwo > G || G % pwo != 0) continue;
      jobs.push_back(detail::make_job("workers", G, pwo, 4 * G, m.worker_grid_points, 1,
                                      false, 1));
    }
  for (auto& j : jobs)
    if (j.channels == 0) j.channels = sweep_channels(m, j.cfg.P_Ci);
  detail::run_jobs(jobs, m);
  return detail::finish(jobs);
}

// Unified bank widened to B_m chunks per read vs B_m crossbar banks.
inline std::vector<SweepRow> sweep_banks(const MetricConfig& m) {
  std::vector<detail::Job> jobs;
  for (std::size_t bm : m.bm_grid) {
    jobs.push_back(detail::make_job("banks_unified", m.bank_G, m.bank_workers, m.bank_P_Ci,
                                    m.bank_grid_points, bm, false, bm));
    jobs.push_back(detail::make_job("banks_crossbar", m.bank_G, m.bank_workers, m.bank_P_Ci,
                                    m.bank_grid_points, bm, true, 1));
  }
  for (auto& j : jobs)
    if (j.channels == 0) j.channels = sweep_channels(m, j.cfg.P_Ci);
  detail::run_jobs(jobs, m);
  return detail::finish(jobs);
}

inline std::vector<SweepRow> sweep_scaling(const MetricConfig& m) {
  std::vector<detail::Job> jobs;
  for (std::size_t ng : m.scale_grid) {
    jobs.push_back(detail::make_job("scale_unified", m.bank_G, m.bank_workers, m.bank_P_Ci,
                                    ng, 1, false, 1));
    jobs.push_back(detail::make_job("scale_crossbar", m.bank_G, m.bank_workers, m.bank_P_Ci,
                                    ng, m.scale_crossbar_banks, true, 1));
  }
  for (auto& j : jobs)
    if (j.channels == 0) j.channels = sweep_channels(m, j.cfg.P_Ci);
  detail::run_jobs(jobs, m);
  return detail::finish(jobs);
}

inline const char* kSweepCsvHeader =
    "kind,G,M,P_Wo,P_Ci,B_m,PTsPFx,seed_count,D_mean,D_std,R,F,F_norm";

inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepCsvHeader << "\n";
  const auto old = os.precision(10);
  for (const auto& r : rows)
    os << r.kind << ',' << r.G << ',' << r.M << ',' << r.P_Wo << ',' << r.P_Ci << ','
       << r.B_m << ',' << r.PTsPFx << ',' << r.seed_count << ',' << r.D_mean << ','
       << r.D_std << ',' << r.R << ',' << r.F << ',' << r.F_norm << "\n";
  os.precision(old);
}

// argmax of F over the P_Ci rows of one G.
inline std::size_t argmax_pci(const std::vector<SweepRow>& rows, std::size_t G) {
  const SweepRow* best = nullptr;
  for (const auto& r : rows)
    if (r.kind == "pci" && r.G == G && (!best || r.F > best->F)) best = &r;
  if (!best) throw ConfigError("no P_Ci rows for G = " + std::to_string(G));
  return best->P_Ci;
}

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("linear_fit needs >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  LinearFit f;
  const double vx = sxx - sx * sx / n, vy = syy - sy * sy / n, cxy = sxy - sx * sy / n;
  f.slope = vx == 0 ? 0 : cxy / vx;
  f.intercept = (sy - f.slope * sx) / n;
  f.r2 = (vx == 0 || vy == 0) ? 1.0 : cxy * cxy / (vx * vy);
  return f;
}

}  // namespace dualsim
