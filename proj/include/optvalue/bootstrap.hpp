#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "optvalue/estimator.hpp"
#include "optvalue/model.hpp"
#include "optvalue/npmle.hpp"
#include "optvalue/rng.hpp"
#include "optvalue/stats.hpp"

namespace optvalue {

struct BootstrapConfig {
  std::size_t m = 0;          // subsample size, 1 <= m <= n
  std::size_t draws = 500;    // bootstrap replicates
  double alpha = 0.05;
  std::uint64_t seed = 0;

  void validate(std::size_t n) const {
    if (m < 1 || m > n) throw std::invalid_argument("BootstrapConfig: require 1 <= m <= n");
    if (draws < 2) throw std::invalid_argument("BootstrapConfig: draws >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("BootstrapConfig: alpha in (0,1)");
  }
};

struct BootstrapCI {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t m = 0;
  std::size_t ill_defined_count = 0;  // draws that hit the learner fallback
  std::size_t discarded = 0;          // fallback draws with no truth available
};

// m-out-of-n bootstrap for the value of an estimated rule. Each draw
// resamples m observations with replacement and recomputes the classical
// value estimate; the CI is the centered percentile-of-roots interval
//   [point - q_{1-a/2}/sqrt(m), point - q_{a/2}/sqrt(m)]
// with roots sqrt(m) (psi* - point), so the width shrinks at a root-m
// rate. Draws on which the learner is
// ill-defined (e.g. an emptied NPMLE cell) take the supplied truth when
// available and are otherwise discarded; both are counted.
inline BootstrapCI m_out_of_n_ci(const Dataset& data, const NuisanceLearner& learner,
                                 const BootstrapConfig& cfg,
                                 std::optional<double> truth_fallback = {}) {
  const std::size_t n = data.size();
  cfg.validate(n);

  BootstrapCI out;
  out.m = cfg.m;
  out.point = classical_one_step(data, learner, cfg.seed).psi_hat;

  std::vector<double> roots;
  roots.reserve(cfg.draws);
  const double root_m = std::sqrt(static_cast<double>(cfg.m));
  for (std::size_t b = 0; b < cfg.draws; ++b) {
    CounterRng rng(cfg.seed, stream_id(b, RngPurpose::Bootstrap));
    Dataset resample;
    resample.covariate_kind = data.covariate_kind;
    resample.records.reserve(cfg.m);
    for (std::size_t i = 0; i < cfg.m; ++i) {
      resample.records.push_back(data.records[rng.below(n)]);
    }
    double psi_star = 0.0;
    bool ill_defined = false;
    try {
      psi_star = classical_one_step(resample, learner, rng.next_u64()).psi_hat;
    } catch (const LearnerError&) {
      ill_defined = true;
    } catch (const IllDefinedNpmle&) {
      ill_defined = true;
    }
    if (ill_defined) {
      ++out.ill_defined_count;
      if (!truth_fallback) {
        ++out.discarded;
        continue;
      }
      psi_star = *truth_fallback;
    }
    roots.push_back(root_m * (psi_star - out.point));
  }
  if (roots.size() < 2) {
    throw std::runtime_error("m_out_of_n_ci: fewer than 2 usable bootstrap draws");
  }
  std::sort(roots.begin(), roots.end());
  out.lower = out.point - quantile_sorted(roots, 1.0 - cfg.alpha / 2.0) / root_m;
  out.upper = out.point - quantile_sorted(roots, cfg.alpha / 2.0) / root_m;
  return out;
}

}  // namespace optvalue
