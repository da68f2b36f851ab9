#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "optvalue/bootstrap.hpp"
#include "optvalue/dgp.hpp"
#include "optvalue/estimator.hpp"
#include "optvalue/kernel.hpp"
#include "optvalue/npmle.hpp"
#include "optvalue/stats.hpp"

namespace optvalue {

enum class Method { Online, Classical, MOutOfN };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Online: return "online";
    case Method::Classical: return "classical";
    case Method::MOutOfN: return "m-out-of-n";
  }
  throw std::logic_error("method_name: bad method");
}

inline Method method_from_name(const std::string& name) {
  if (name == "online") return Method::Online;
  if (name == "classical") return Method::Classical;
  if (name == "m-out-of-n") return Method::MOutOfN;
  throw std::invalid_argument("unknown method '" + name + "'");
}

// Whether the influence term uses the true (Qbar0, g0) with only the rule
// estimated (the simulation default for continuous designs) or fully
// estimated nuisances (the discrete NPMLE default).
enum class NuisanceMode { FullyEstimated, OracleNuisance };

inline std::string mode_name(NuisanceMode m) {
  return m == NuisanceMode::FullyEstimated ? "fully-estimated" : "oracle-nuisance";
}

inline NuisanceMode default_mode(DgpKind dgp) {
  return dgp == DgpKind::DiscreteExceptional ? NuisanceMode::FullyEstimated
                                             : NuisanceMode::OracleNuisance;
}

// The discrete NPMLE is cheap enough to refit after every observation,
// matching its simulation protocol; kernel fits use the chunked default
// S = (n - ell) / ell.
inline std::size_t default_refit_blocks(DgpKind dgp, std::size_t n, std::size_t ell_n) {
  if (dgp == DgpKind::DiscreteExceptional) return n - ell_n;
  return std::max<std::size_t>(1, (n - ell_n) / ell_n);
}

inline OutcomeOracle outcome_oracle(DgpKind dgp) {
  OutcomeOracle o;
  o.q_bar = [dgp](int a, double w) { return detail::qbar0(dgp, a, Covariate{w}); };
  o.g = [dgp](int a, double w) { return detail::g0(dgp, a, Covariate{w}); };
  return o;
}

inline NuisanceLearner make_learner(DgpKind dgp, NuisanceMode mode, const BandwidthGrid& grid,
                                    std::optional<double> fixed_bandwidth = {}) {
  if (dgp == DgpKind::DiscreteExceptional) {
    if (mode == NuisanceMode::FullyEstimated) return npmle_learner();
    // oracle Qbar/g, NPMLE rule
    const OracleTruth truth = oracle(dgp);
    return NuisanceLearner{
        "npmle-rule-oracle-nuisance",
        [truth](const Dataset& data, std::uint64_t) {
          auto fit = std::make_shared<NpmleFit>(data);
          NuisanceModel m;
          m.q_bar = truth.q_bar0;
          m.g = truth.g0;
          m.blip = [fit](const Covariate& w) { return fit->blip(stratum(w)); };
          m.rule = rule_from_blip(m.blip);
          return m;
        }};
  }
  if (mode == NuisanceMode::OracleNuisance) {
    return kernel_rule_learner(outcome_oracle(dgp), grid, fixed_bandwidth);
  }
  return kernel_plug_in_learner(grid);
}

struct ExperimentConfig {
  DgpKind dgp = DgpKind::DiscreteExceptional;
  std::size_t n = 1000;
  std::size_t ell_n = 100;
  std::vector<Method> methods = {Method::Online, Method::Classical};
  std::size_t replicates = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::optional<NuisanceMode> mode;  // defaults per DGP
  double sigma_floor = 1e-3;
  std::size_t threads = 1;
  std::size_t bootstrap_m = 0;  // 0 means n
  std::size_t bootstrap_draws = 500;
  std::optional<std::size_t> refit_blocks;  // default per default_refit_blocks
  BandwidthGrid grid = BandwidthGrid::default_grid();

  std::size_t resolved_refit_blocks() const {
    return refit_blocks ? *refit_blocks : default_refit_blocks(dgp, n, ell_n);
  }

  NuisanceMode resolved_mode() const { return mode ? *mode : default_mode(dgp); }

  void validate() const {
    if (replicates < 1) throw std::invalid_argument("ExperimentConfig: replicates >= 1");
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("ExperimentConfig: alpha in (0, 0.5)");
    if (ell_n < 1 || ell_n >= n) throw std::invalid_argument("ExperimentConfig: 1 <= ell_n < n");
    if (methods.empty()) throw std::invalid_argument("ExperimentConfig: no methods selected");
  }
};

struct MethodResult {
  bool ok = false;
  std::string error;
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double lower_one_sided = 0.0;
  double width = 0.0;
  bool covered_truth = false;
  bool covered_lower = false;
  bool covered_da = false;
  double max_abs_standardized = 0.0;  // online only
};

struct ReplicateRecord {
  std::size_t index = 0;
  double truth = 0.0;
  bool da_ok = false;
  double da_target = 0.0;  // value of the rule fit on the full sample
  std::string rule_fingerprint;
  std::map<Method, MethodResult> results;
};

struct MethodSummary {
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double coverage_two_sided = 0.0, coverage_two_sided_se = 0.0;
  double coverage_lower = 0.0, coverage_lower_se = 0.0;
  std::size_t n_da = 0;
  double coverage_da = 0.0, coverage_da_se = 0.0;
  double mean_bias = 0.0, mean_bias_se = 0.0;
  double squared_bias = 0.0;
  double mean_width = 0.0, mean_width_se = 0.0;
};

struct MonteCarloReport {
  DgpKind dgp = DgpKind::DiscreteExceptional;
  std::size_t n = 0, ell_n = 0, replicates = 0;
  double alpha = 0.05;
  NuisanceMode mode = NuisanceMode::FullyEstimated;
  double truth = 0.0;
  std::map<Method, MethodSummary> methods;
};

namespace detail {

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, count);
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline std::string rule_fingerprint(const TreatmentRule& rule, CovariateKind kind) {
  std::string fp;
  try {
    if (kind == CovariateKind::Discrete) {
      for (int w = 0; w < 4; ++w) fp.push_back(rule.decide(Covariate{w}) ? '1' : '0');
    } else {
      for (int i = 0; i <= 32; ++i) {
        const double w = -1.0 + i / 16.0;
        fp.push_back(rule.decide(Covariate{w}) ? '1' : '0');
      }
    }
  } catch (const std::exception&) {
    fp.push_back('?');
  }
  return fp;
}

inline double binomial_se(double p, std::size_t n) {
  return n == 0 ? 0.0 : std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace detail

// Deterministic aggregation of replicate records (records must be in
// replicate order); shared by run_experiment and the CLI summarize pass.
inline MonteCarloReport aggregate_records(const ExperimentConfig& cfg, double truth,
                                          const std::vector<ReplicateRecord>& records) {
  MonteCarloReport report;
  report.dgp = cfg.dgp;
  report.n = cfg.n;
  report.ell_n = cfg.ell_n;
  report.replicates = records.size();
  report.alpha = cfg.alpha;
  report.mode = cfg.resolved_mode();
  report.truth = truth;
  for (Method m : cfg.methods) {
    MethodSummary s;
    std::vector<double> biases, widths;
    std::size_t cov2 = 0, covlo = 0, covda = 0;
    for (const ReplicateRecord& r : records) {
      auto it = r.results.find(m);
      if (it == r.results.end()) continue;
      const MethodResult& res = it->second;
      if (!res.ok) {
        ++s.n_failed;
        continue;
      }
      ++s.n_ok;
      biases.push_back(res.point - truth);
      widths.push_back(res.width);
      if (res.covered_truth) ++cov2;
      if (res.covered_lower) ++covlo;
      if (r.da_ok) {
        ++s.n_da;
        if (res.covered_da) ++covda;
      }
    }
    if (s.n_ok > 0) {
      s.coverage_two_sided = static_cast<double>(cov2) / s.n_ok;
      s.coverage_two_sided_se = detail::binomial_se(s.coverage_two_sided, s.n_ok);
      s.coverage_lower = static_cast<double>(covlo) / s.n_ok;
      s.coverage_lower_se = detail::binomial_se(s.coverage_lower, s.n_ok);
      if (s.n_da > 0) {
        s.coverage_da = static_cast<double>(covda) / s.n_da;
        s.coverage_da_se = detail::binomial_se(s.coverage_da, s.n_da);
      }
      s.mean_bias = mean(biases);
      s.mean_bias_se = s.n_ok > 1 ? sample_sd(biases) / std::sqrt(static_cast<double>(s.n_ok)) : 0.0;
      s.squared_bias = s.mean_bias * s.mean_bias;
      s.mean_width = mean(widths);
      s.mean_width_se = s.n_ok > 1 ? sample_sd(widths) / std::sqrt(static_cast<double>(s.n_ok)) : 0.0;
    }
    report.methods[m] = s;
  }
  return report;
}

inline std::pair<MonteCarloReport, std::vector<ReplicateRecord>> run_experiment(
    const ExperimentConfig& cfg) {
  cfg.validate();
  const OracleTruth truth = oracle(cfg.dgp);
  const NuisanceMode mode = cfg.resolved_mode();
  const NuisanceLearner learner = make_learner(cfg.dgp, mode, cfg.grid);
  const CovariateKind ckind = dgp_covariate_kind(cfg.dgp);

  std::vector<ReplicateRecord> records(cfg.replicates);
  detail::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    ReplicateRecord rec;
    rec.index = r;
    rec.truth = truth.optimal_value;
    const Dataset data = sample(cfg.dgp, cfg.n, cfg.seed, r);
    const std::uint64_t fit_seed = CounterRng(cfg.seed, stream_id(r, RngPurpose::Fit)).next_u64();

    // data-adaptive target: the value of the rule fit on the entire sample
    try {
      const NuisanceModel full = learner.fit(data, fit_seed);
      rec.da_target = value_of_rule(cfg.dgp, full.rule);
      rec.rule_fingerprint = detail::rule_fingerprint(full.rule, ckind);
      rec.da_ok = true;
    } catch (const std::exception&) {
      rec.da_ok = false;
    }

    for (Method m : cfg.methods) {
      MethodResult res;
      try {
        double lb = 0.0;
        ConfidenceInterval ci{};
        if (m == Method::Online) {
          const ChunkSchedule sched =
              build_chunk_schedule(cfg.n, cfg.ell_n, cfg.resolved_refit_blocks());
          OnlineOptions opts;
          opts.sigma_floor = cfg.sigma_floor;
          opts.seed = fit_seed;
          const OnlineValueEstimate est = online_one_step(data, sched, learner, opts);
          ci = two_sided_ci(est, cfg.alpha);
          lb = lower_bound(est, cfg.alpha);
          res.point = est.psi_hat;
          res.max_abs_standardized = est.max_abs_standardized;
        } else if (m == Method::Classical) {
          const ClassicalEstimate est = classical_one_step(data, learner, fit_seed);
          ci = wald_ci(est, cfg.alpha);
          lb = wald_lower_bound(est, cfg.alpha);
          res.point = est.psi_hat;
        } else {
          BootstrapConfig bcfg;
          bcfg.m = cfg.bootstrap_m == 0 ? cfg.n : cfg.bootstrap_m;
          bcfg.draws = cfg.bootstrap_draws;
          bcfg.alpha = cfg.alpha;
          bcfg.seed = fit_seed;
          const BootstrapCI bci = m_out_of_n_ci(data, learner, bcfg, truth.optimal_value);
          ci = {bci.lower, bci.upper};
          lb = bci.lower;
          res.point = bci.point;
        }
        res.lower = ci.lower;
        res.upper = ci.upper;
        res.lower_one_sided = lb;
        res.width = ci.width();
        res.covered_truth = ci.lower <= rec.truth && rec.truth <= ci.upper;
        res.covered_lower = rec.truth > lb;
        res.covered_da =
            rec.da_ok && ci.lower <= rec.da_target && rec.da_target <= ci.upper;
        res.ok = true;
      } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
      }
      rec.results[m] = res;
    }
    records[r] = std::move(rec);
  });
  return {aggregate_records(cfg, truth.optimal_value, records), records};
}

// ---------------------------------------------------------------------------
// permutation sensitivity

struct PermutationReport {
  std::size_t replicates = 0;
  std::size_t n_ok = 0;
  double agreement = 0.0;      // both-or-neither two-sided coverage
  double agreement_se = 0.0;
  double mean_abs_diff = 0.0;  // |psi_B - psi_A|
  double sd_diff = 0.0;
  std::vector<double> diffs;
};

inline PermutationReport permutation_sensitivity(const ExperimentConfig& cfg) {
  cfg.validate();
  const OracleTruth truth = oracle(cfg.dgp);
  const NuisanceLearner learner = make_learner(cfg.dgp, cfg.resolved_mode(), cfg.grid);

  struct Row {
    bool ok = false;
    bool agree = false;
    double diff = 0.0;
  };
  std::vector<Row> rows(cfg.replicates);
  detail::parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    Row row;
    try {
      const Dataset data = sample(cfg.dgp, cfg.n, cfg.seed, r);
      Dataset permuted = data;
      CounterRng prng(cfg.seed, stream_id(r, RngPurpose::Permute));
      deterministic_shuffle(permuted.records, prng);
      const std::uint64_t fit_seed =
          CounterRng(cfg.seed, stream_id(r, RngPurpose::Fit)).next_u64();
      const ChunkSchedule sched =
          build_chunk_schedule(cfg.n, cfg.ell_n, cfg.resolved_refit_blocks());
      OnlineOptions opts;
      opts.sigma_floor = cfg.sigma_floor;
      opts.seed = fit_seed;
      const OnlineValueEstimate est_a = online_one_step(data, sched, learner, opts);
      const OnlineValueEstimate est_b = online_one_step(permuted, sched, learner, opts);
      const ConfidenceInterval ci_a = two_sided_ci(est_a, cfg.alpha);
      const ConfidenceInterval ci_b = two_sided_ci(est_b, cfg.alpha);
      const bool cov_a =
          ci_a.lower <= truth.optimal_value && truth.optimal_value <= ci_a.upper;
      const bool cov_b =
          ci_b.lower <= truth.optimal_value && truth.optimal_value <= ci_b.upper;
      row.agree = cov_a == cov_b;
      row.diff = est_b.psi_hat - est_a.psi_hat;
      row.ok = true;
    } catch (const std::exception&) {
      row.ok = false;
    }
    rows[r] = row;
  });

  PermutationReport rep;
  rep.replicates = cfg.replicates;
  std::size_t agree = 0;
  for (const Row& row : rows) {
    if (!row.ok) continue;
    ++rep.n_ok;
    if (row.agree) ++agree;
    rep.diffs.push_back(row.diff);
  }
  if (rep.n_ok > 0) {
    rep.agreement = static_cast<double>(agree) / rep.n_ok;
    rep.agreement_se = detail::binomial_se(rep.agreement, rep.n_ok);
    double sum_abs = 0.0;
    for (double d : rep.diffs) sum_abs += std::fabs(d);
    rep.mean_abs_diff = sum_abs / rep.n_ok;
    rep.sd_diff = rep.n_ok > 1 ? sample_sd(rep.diffs) : 0.0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// ell_n sensitivity

struct EllnRatioEntry {
  std::size_t ell_from = 0, ell_to = 0;
  double ratio = 0.0;  // mean width at ell_to / mean width at ell_from
  double se = 0.0;     // delta-method Monte Carlo standard error
};

struct EllnReport {
  std::vector<std::size_t> ell_values;
  std::vector<double> mean_width;
  std::vector<double> mean_width_se;
  std::vector<EllnRatioEntry> ratios;
  std::size_t n_ok = 0;
};

inline EllnReport elln_sensitivity(DgpKind dgp, std::size_t n,
                                   const std::vector<std::size_t>& ell_values,
                                   std::size_t replicates, std::uint64_t seed = 0,
                                   double alpha = 0.05, double sigma_floor = 1e-3,
                                   std::size_t threads = 1,
                                   const BandwidthGrid& grid = BandwidthGrid::default_grid()) {
  if (ell_values.empty()) throw std::invalid_argument("elln_sensitivity: no ell values");
  for (std::size_t ell : ell_values) {
    if (ell < 1 || ell >= n) throw std::invalid_argument("elln_sensitivity: bad ell value");
  }
  const NuisanceLearner learner = make_learner(dgp, default_mode(dgp), grid);
  const std::size_t k = ell_values.size();
  std::vector<std::vector<double>> widths(k);  // per ell, per ok replicate
  std::vector<std::vector<double>> row_widths(replicates);
  detail::parallel_for(replicates, threads, [&](std::size_t r) {
    try {
      const Dataset data = sample(dgp, n, seed, r);
      const std::uint64_t fit_seed = CounterRng(seed, stream_id(r, RngPurpose::Fit)).next_u64();
      std::vector<double> ws;
      ws.reserve(k);
      for (std::size_t ell : ell_values) {
        const ChunkSchedule sched = build_chunk_schedule(n, ell, default_refit_blocks(dgp, n, ell));
        OnlineOptions opts;
        opts.sigma_floor = sigma_floor;
        opts.seed = fit_seed;
        const OnlineValueEstimate est = online_one_step(data, sched, learner, opts);
        ws.push_back(two_sided_ci(est, alpha).width());
      }
      row_widths[r] = std::move(ws);
    } catch (const std::exception&) {
      row_widths[r].clear();
    }
  });
  EllnReport rep;
  rep.ell_values = ell_values;
  for (std::size_t r = 0; r < replicates; ++r) {
    if (row_widths[r].size() != k) continue;
    ++rep.n_ok;
    for (std::size_t i = 0; i < k; ++i) widths[i].push_back(row_widths[r][i]);
  }
  if (rep.n_ok == 0) throw std::runtime_error("elln_sensitivity: all replicates failed");
  for (std::size_t i = 0; i < k; ++i) {
    rep.mean_width.push_back(mean(widths[i]));
    rep.mean_width_se.push_back(
        rep.n_ok > 1 ? sample_sd(widths[i]) / std::sqrt(static_cast<double>(rep.n_ok)) : 0.0);
  }
  const double nn = static_cast<double>(rep.n_ok);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      EllnRatioEntry e;
      e.ell_from = ell_values[i];
      e.ell_to = ell_values[j];
      const double m1 = rep.mean_width[i], m2 = rep.mean_width[j];
      e.ratio = m2 / m1;
      if (rep.n_ok > 1) {
        double v1 = 0.0, v2 = 0.0, cov = 0.0;
        for (std::size_t r = 0; r < widths[i].size(); ++r) {
          v1 += (widths[i][r] - m1) * (widths[i][r] - m1);
          v2 += (widths[j][r] - m2) * (widths[j][r] - m2);
          cov += (widths[i][r] - m1) * (widths[j][r] - m2);
        }
        v1 /= nn - 1;
        v2 /= nn - 1;
        cov /= nn - 1;
        e.se = std::fabs(e.ratio) *
               std::sqrt(std::max(0.0, v2 / (m2 * m2) + v1 / (m1 * m1) - 2.0 * cov / (m1 * m2)) / nn);
      }
      rep.ratios.push_back(e);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// m-out-of-n sweep

struct SweepRow {
  std::size_t m = 0;
  std::size_t n_ok = 0, n_failed = 0;
  double coverage = 0.0, coverage_se = 0.0;
  double mean_width = 0.0;
  double width_ratio_vs_online = 0.0;  // mean width / online mean width
  double mean_ill_defined = 0.0;       // per-replicate fallback draws
};

struct SweepReport {
  DgpKind dgp = DgpKind::DiscreteExceptional;
  std::size_t n = 0, replicates = 0, draws = 0;
  double online_coverage = 0.0, online_coverage_se = 0.0, online_mean_width = 0.0;
  std::size_t online_n_ok = 0;
  std::vector<SweepRow> rows;
};

inline std::vector<std::size_t> default_m_grid(std::size_t n) {
  std::vector<std::size_t> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(n * i / 10);
  return grid;
}

inline SweepReport bootstrap_sweep(DgpKind dgp, std::size_t n,
                                   const std::vector<std::size_t>& m_grid,
                                   std::size_t replicates, std::size_t draws = 500,
                                   double alpha = 0.05, std::uint64_t seed = 0,
                                   std::size_t ell_n = 25, double sigma_floor = 1e-3,
                                   std::size_t threads = 1,
                                   const BandwidthGrid& grid = BandwidthGrid::default_grid()) {
  if (m_grid.empty()) throw std::invalid_argument("bootstrap_sweep: empty m grid");
  const OracleTruth truth = oracle(dgp);
  const NuisanceLearner online_learner = make_learner(dgp, default_mode(dgp), grid);
  const bool continuous = dgp_covariate_kind(dgp) == CovariateKind::Continuous;

  struct Row {
    bool online_ok = false;
    bool online_cov = false;
    double online_width = 0.0;
    std::vector<int> boot_ok;    // per m
    std::vector<int> boot_cov;   // per m
    std::vector<double> boot_width;
    std::vector<double> boot_ill;
  };
  std::vector<Row> rows(replicates);
  detail::parallel_for(replicates, threads, [&](std::size_t r) {
    Row row;
    row.boot_ok.assign(m_grid.size(), 0);
    row.boot_cov.assign(m_grid.size(), 0);
    row.boot_width.assign(m_grid.size(), 0.0);
    row.boot_ill.assign(m_grid.size(), 0.0);
    const Dataset data = sample(dgp, n, seed, r);
    const std::uint64_t fit_seed = CounterRng(seed, stream_id(r, RngPurpose::Fit)).next_u64();
    try {
      const ChunkSchedule sched =
          build_chunk_schedule(n, ell_n, default_refit_blocks(dgp, n, ell_n));
      OnlineOptions opts;
      opts.sigma_floor = sigma_floor;
      opts.seed = fit_seed;
      const OnlineValueEstimate est = online_one_step(data, sched, online_learner, opts);
      const ConfidenceInterval ci = two_sided_ci(est, alpha);
      row.online_ok = true;
      row.online_cov = ci.lower <= truth.optimal_value && truth.optimal_value <= ci.upper;
      row.online_width = ci.width();
    } catch (const std::exception&) {
      row.online_ok = false;
    }
    // the bootstrap reuses a single full-data bandwidth per replicate
    NuisanceLearner boot_learner = online_learner;
    if (continuous) {
      try {
        const double h = cv_select_bandwidth(data, grid, outcome_oracle(dgp), fit_seed);
        boot_learner = make_learner(dgp, default_mode(dgp), grid, h);
      } catch (const std::exception&) {
        // fall back to per-fit CV
      }
    }
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
      try {
        BootstrapConfig bcfg;
        bcfg.m = m_grid[mi];
        bcfg.draws = draws;
        bcfg.alpha = alpha;
        bcfg.seed = fit_seed + 0x9e3779b97f4a7c15ULL * (mi + 1);
        const BootstrapCI bci = m_out_of_n_ci(data, boot_learner, bcfg, truth.optimal_value);
        row.boot_ok[mi] = 1;
        row.boot_cov[mi] =
            bci.lower <= truth.optimal_value && truth.optimal_value <= bci.upper ? 1 : 0;
        row.boot_width[mi] = bci.upper - bci.lower;
        row.boot_ill[mi] = static_cast<double>(bci.ill_defined_count);
      } catch (const std::exception&) {
        row.boot_ok[mi] = 0;
      }
    }
    rows[r] = std::move(row);
  });

  SweepReport rep;
  rep.dgp = dgp;
  rep.n = n;
  rep.replicates = replicates;
  rep.draws = draws;
  std::size_t online_cov = 0;
  double online_width_sum = 0.0;
  for (const Row& row : rows) {
    if (!row.online_ok) continue;
    ++rep.online_n_ok;
    if (row.online_cov) ++online_cov;
    online_width_sum += row.online_width;
  }
  if (rep.online_n_ok > 0) {
    rep.online_coverage = static_cast<double>(online_cov) / rep.online_n_ok;
    rep.online_coverage_se = detail::binomial_se(rep.online_coverage, rep.online_n_ok);
    rep.online_mean_width = online_width_sum / rep.online_n_ok;
  }
  for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
    SweepRow sr;
    sr.m = m_grid[mi];
    std::size_t cov = 0;
    double width_sum = 0.0, ill_sum = 0.0;
    for (const Row& row : rows) {
      if (!row.boot_ok[mi]) {
        ++sr.n_failed;
        continue;
      }
      ++sr.n_ok;
      cov += row.boot_cov[mi];
      width_sum += row.boot_width[mi];
      ill_sum += row.boot_ill[mi];
    }
    if (sr.n_ok > 0) {
      sr.coverage = static_cast<double>(cov) / sr.n_ok;
      sr.coverage_se = detail::binomial_se(sr.coverage, sr.n_ok);
      sr.mean_width = width_sum / sr.n_ok;
      sr.mean_ill_defined = ill_sum / sr.n_ok;
      if (rep.online_mean_width > 0.0) {
        sr.width_ratio_vs_online = sr.mean_width / rep.online_mean_width;
      }
    }
    rep.rows.push_back(sr);
  }
  return rep;
}

}  // namespace optvalue
