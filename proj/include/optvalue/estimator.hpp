#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optvalue/model.hpp"
#include "optvalue/normal.hpp"
#include "optvalue/stats.hpp"

namespace optvalue {

// Refit indices for the chunked scheme: the first block is the initial
// learning sample of size ell_n, the remaining n - ell_n observations are
// split into s refit blocks whose sizes differ by at most one.
struct ChunkSchedule {
  std::size_t n = 0;
  std::size_t ell_n = 0;
  std::vector<std::size_t> boundaries;  // ell_n = boundaries[0] < ... < boundaries[s] = n

  std::size_t refit_blocks() const { return boundaries.size() - 1; }
};

inline ChunkSchedule build_chunk_schedule(std::size_t n, std::size_t ell_n,
                                          std::optional<std::size_t> s = {}) {
  if (ell_n < 1 || ell_n >= n) {
    throw std::invalid_argument("build_chunk_schedule: require 1 <= ell_n < n");
  }
  std::size_t blocks = s ? *s : std::max<std::size_t>(1, (n - ell_n) / ell_n);
  blocks = std::min(blocks, n - ell_n);
  if (blocks < 1) throw std::invalid_argument("build_chunk_schedule: need >= 1 refit block");
  ChunkSchedule sched;
  sched.n = n;
  sched.ell_n = ell_n;
  sched.boundaries.push_back(ell_n);
  const std::size_t rest = n - ell_n;
  std::size_t cum = ell_n;
  for (std::size_t b = 0; b < blocks; ++b) {
    cum += rest / blocks + (b < rest % blocks ? 1 : 0);
    sched.boundaries.push_back(cum);
  }
  return sched;
}

// sqrt(max{floor_var, divide-by-count variance of the influence term over
// the history}). The floor keeps the inverse weights finite.
inline double estimate_sigma(const NuisanceModel& model, const Dataset& history,
                             double floor_var,
                             double propensity_floor = kDefaultPropensityFloor) {
  if (history.records.empty()) throw std::invalid_argument("estimate_sigma: empty history");
  if (!(floor_var > 0.0)) throw std::invalid_argument("estimate_sigma: floor must be > 0");
  double sum = 0.0, sumsq = 0.0;
  for (const Observation& o : history.records) {
    const double d = influence_term(model, o, propensity_floor);
    sum += d;
    sumsq += d * d;
  }
  const double k = static_cast<double>(history.size());
  const double var = std::max(0.0, sumsq / k - (sum / k) * (sum / k));
  return std::sqrt(std::max(floor_var, var));
}

struct PerTermEntry {
  std::size_t j;     // 1-based observation index
  double influence;  // D~_{n,j}(O_j)
  double sigma;      // sigma~_{n,j}
};

struct OnlineValueEstimate {
  double psi_hat = 0.0;
  double gamma_n = 0.0;  // mean of sigma^{-1} over j > ell_n
  std::size_t n = 0;
  std::size_t ell_n = 0;
  double se = 0.0;  // gamma_n^{-1} / sqrt(n - ell_n)
  double max_abs_standardized = 0.0;  // max_j |D~_{n,j}(O_j)| / sigma~_{n,j}
  std::vector<PerTermEntry> per_term_log;  // opt-in
};

struct LearnerError : std::runtime_error {
  std::size_t block_index;
  LearnerError(std::size_t block, const std::string& what)
      : std::runtime_error(what), block_index(block) {}
};

struct OnlineOptions {
  double sigma_floor = 1e-3;  // floor on sigma~^2
  std::uint64_t seed = 0;
  double propensity_floor = kDefaultPropensityFloor;
  bool keep_per_term_log = false;
};

// The online one-step estimator: for each block, nuisances and sigma~ are
// refit on the completed prefix only, then every observation in the block
// contributes sigma^{-1}-weighted influence terms. Strictly sequential in
// j; the martingale structure forbids reordering.
inline OnlineValueEstimate online_one_step(const Dataset& data, const ChunkSchedule& schedule,
                                           const NuisanceLearner& learner,
                                           const OnlineOptions& opts = {}) {
  if (schedule.n != data.size()) {
    throw std::invalid_argument("online_one_step: schedule inconsistent with data length");
  }
  OnlineValueEstimate est;
  est.n = schedule.n;
  est.ell_n = schedule.ell_n;
  double weighted_sum = 0.0, inv_sigma_sum = 0.0;
  for (std::size_t block = 0; block + 1 < schedule.boundaries.size(); ++block) {
    const std::size_t fit_end = schedule.boundaries[block];
    const std::size_t block_end = schedule.boundaries[block + 1];
    NuisanceModel model;
    double sigma;
    try {
      const Dataset prefix = data.prefix(fit_end);
      model = learner.fit(prefix, opts.seed + 0x9e3779b97f4a7c15ULL * block);
      sigma = estimate_sigma(model, prefix, opts.sigma_floor, opts.propensity_floor);
    } catch (const PositivityError&) {
      throw;
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "online_one_step: learner '" << learner.name << "' failed on block " << block
          << " (prefix size " << fit_end << "): " << e.what();
      throw LearnerError(block, msg.str());
    }
    for (std::size_t j = fit_end; j < block_end; ++j) {
      const double d = influence_term(model, data.records[j], opts.propensity_floor);
      weighted_sum += d / sigma;
      inv_sigma_sum += 1.0 / sigma;
      est.max_abs_standardized = std::max(est.max_abs_standardized, std::fabs(d) / sigma);
      if (opts.keep_per_term_log) est.per_term_log.push_back({j + 1, d, sigma});
    }
  }
  const double terms = static_cast<double>(schedule.n - schedule.ell_n);
  est.psi_hat = weighted_sum / inv_sigma_sum;
  est.gamma_n = inv_sigma_sum / terms;
  est.se = 1.0 / (est.gamma_n * std::sqrt(terms));
  return est;
}

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
};

inline ConfidenceInterval two_sided_ci(const OnlineValueEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("two_sided_ci: alpha must lie in (0,1)");
  }
  const double half = normal_quantile(1.0 - alpha / 2.0) * est.se;
  return {est.psi_hat - half, est.psi_hat + half};
}

// Lower endpoint of the 1-2*alpha two-sided interval; a (potentially
// conservative) one-sided 1-alpha bound for the optimal value.
inline double lower_bound(const OnlineValueEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw std::invalid_argument("lower_bound: alpha must lie in (0, 0.5)");
  }
  return est.psi_hat - normal_quantile(1.0 - alpha) * est.se;
}

// Non-online comparator: one fit on all n observations, Wald inference.
// Incorrect at exceptional laws; kept for the head-to-head comparison.
struct ClassicalEstimate {
  double psi_hat = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline ClassicalEstimate classical_one_step(const Dataset& data, const NuisanceLearner& learner,
                                            std::uint64_t seed = 0,
                                            double propensity_floor = kDefaultPropensityFloor) {
  if (data.records.size() < 2) {
    throw std::invalid_argument("classical_one_step: need at least 2 observations");
  }
  NuisanceModel model;
  try {
    model = learner.fit(data, seed);
  } catch (const std::exception& e) {
    throw LearnerError(0, std::string("classical_one_step: learner '") + learner.name +
                              "' failed: " + e.what());
  }
  std::vector<double> terms;
  terms.reserve(data.size());
  for (const Observation& o : data.records) {
    terms.push_back(influence_term(model, o, propensity_floor));
  }
  ClassicalEstimate est;
  est.n = data.size();
  est.psi_hat = mean(terms);
  est.se = sample_sd(terms) / std::sqrt(static_cast<double>(data.size()));
  return est;
}

inline ConfidenceInterval wald_ci(const ClassicalEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("wald_ci: alpha must lie in (0,1)");
  }
  const double half = normal_quantile(1.0 - alpha / 2.0) * est.se;
  return {est.psi_hat - half, est.psi_hat + half};
}

inline double wald_lower_bound(const ClassicalEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw std::invalid_argument("wald_lower_bound: alpha must lie in (0, 0.5)");
  }
  return est.psi_hat - normal_quantile(1.0 - alpha) * est.se;
}

}  // namespace optvalue
