#include <catch2/catch_amalgamated.hpp>

#include "optvalue/dgp.hpp"
#include "optvalue/estimator.hpp"
#include "optvalue/npmle.hpp"

using namespace optvalue;

TEST_CASE("chunk schedule splits the post-initial sample evenly") {
  const ChunkSchedule s1 = build_chunk_schedule(1000, 100);
  CHECK(s1.refit_blocks() == 9);
  for (std::size_t b = 0; b + 1 < s1.boundaries.size(); ++b) {
    CHECK(s1.boundaries[b + 1] - s1.boundaries[b] == 100);
  }

  const ChunkSchedule s2 = build_chunk_schedule(4, 1, 3);
  CHECK(s2.boundaries == std::vector<std::size_t>{1, 2, 3, 4});

  const ChunkSchedule s3 = build_chunk_schedule(250, 25);
  CHECK(s3.refit_blocks() == 9);
  for (std::size_t b = 0; b + 1 < s3.boundaries.size(); ++b) {
    CHECK(s3.boundaries[b + 1] - s3.boundaries[b] == 25);
  }

  const ChunkSchedule s4 = build_chunk_schedule(103, 10, 4);
  CHECK(s4.refit_blocks() == 4);
  std::size_t min_sz = 1000, max_sz = 0;
  for (std::size_t b = 0; b + 1 < s4.boundaries.size(); ++b) {
    const std::size_t sz = s4.boundaries[b + 1] - s4.boundaries[b];
    min_sz = std::min(min_sz, sz);
    max_sz = std::max(max_sz, sz);
  }
  CHECK(max_sz - min_sz <= 1);
  CHECK(s4.boundaries.back() == 103);

  CHECK_THROWS_AS(build_chunk_schedule(10, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_chunk_schedule(10, 0), std::invalid_argument);
}

TEST_CASE("sigma estimate hits the floor on degenerate histories") {
  NuisanceModel m;
  m.q_bar = [](int, const Covariate&) { return 0.5; };
  m.g = [](int a, const Covariate&) { return 0.5; };
  m.blip = [](const Covariate&) { return 0.0; };
  m.rule = TreatmentRule{[](const Covariate&) { return 1; }};
  Dataset hist;
  hist.covariate_kind = CovariateKind::Discrete;
  // every observation untreated: the influence term is constantly 0.5
  for (int i = 0; i < 20; ++i) hist.records.emplace_back(Covariate{0}, 0, 0.3);
  CHECK(estimate_sigma(m, hist, 1e-3) == Catch::Approx(std::sqrt(1e-3)));
  CHECK(estimate_sigma(m, hist, 1.0) >= 1.0);
}

TEST_CASE("sigma estimate matches the enumerated influence variance") {
  const DgpKind kind = DgpKind::DiscreteExceptional;
  const OracleTruth truth = oracle(kind);
  // exact enumeration of Var(D~) under the fixed rule d(w) = 1{w = 0}
  double m1 = 0.0, m2 = 0.0;
  for (int w = 0; w < 4; ++w) {
    const int d = truth.optimal_rule.decide(Covariate{w});
    for (int a = 0; a < 2; ++a) {
      for (int y = 0; y < 2; ++y) {
        const double q = truth.q_bar0(a, Covariate{w});
        const double p = 0.25 * truth.g0(a, Covariate{w}) * (y == 1 ? q : 1.0 - q);
        const NuisanceModel model = truth.as_model();
        const double dt = influence_term(model, Observation(Covariate{w}, a, y));
        m1 += p * dt;
        m2 += p * dt * dt;
      }
    }
  }
  const double var_exact = m2 - m1 * m1;

  const Dataset hist = sample(kind, 10000, 77);
  const double sigma = estimate_sigma(truth.as_model(), hist, 1e-3);
  CHECK(sigma * sigma == Catch::Approx(var_exact).epsilon(0.02));
}

TEST_CASE("unit sigma reduces the estimate to the plain mean") {
  const DgpKind kind = DgpKind::DiscreteExceptional;
  const OracleTruth truth = oracle(kind);
  const NuisanceLearner fixed{"oracle", [&truth](const Dataset&, std::uint64_t) {
                                return truth.as_model();
                              }};
  const Dataset data = sample(kind, 400, 3);
  const ChunkSchedule sched = build_chunk_schedule(400, 100);
  OnlineOptions opts;
  opts.sigma_floor = 4.0;  // above the true influence variance, so sigma = 2 throughout
  const OnlineValueEstimate est = online_one_step(data, sched, fixed, opts);
  double mean_tail = 0.0;
  const NuisanceModel model = truth.as_model();
  for (std::size_t j = 100; j < 400; ++j) mean_tail += influence_term(model, data.records[j]);
  mean_tail /= 300.0;
  CHECK(est.psi_hat == Catch::Approx(mean_tail).margin(1e-12));
  CHECK(est.gamma_n == Catch::Approx(0.5).margin(1e-12));
  CHECK(est.se == Catch::Approx(2.0 / std::sqrt(300.0)).margin(1e-12));
}

TEST_CASE("per-term pairs are predictable from the past") {
  const DgpKind kind = DgpKind::DiscreteExceptional;
  const NuisanceLearner learner = npmle_learner();
  CounterRng rng(123, 1);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 120;
    Dataset data = sample(kind, n, 1000 + trial);
    const ChunkSchedule sched = build_chunk_schedule(n, 40, 8);
    OnlineOptions opts;
    opts.keep_per_term_log = true;
    OnlineValueEstimate base;
    try {
      base = online_one_step(data, sched, learner, opts);
    } catch (const std::exception&) {
      continue;  // small-sample NPMLE gaps; predictability needs a completed run
    }
    const std::size_t k = 41 + rng.below(n - 41);  // mutate observations with index >= k
    Dataset mutated = data;
    for (std::size_t i = k; i < n; ++i) {
      mutated.records[i].y = 1.0 - mutated.records[i].y;
      mutated.records[i].a = 1 - mutated.records[i].a;
    }
    OnlineValueEstimate other;
    try {
      other = online_one_step(mutated, sched, learner, opts);
    } catch (const std::exception&) {
      continue;
    }
    for (std::size_t i = 0; i < base.per_term_log.size(); ++i) {
      const PerTermEntry& a = base.per_term_log[i];
      const PerTermEntry& b = other.per_term_log[i];
      if (a.j > k) break;  // entry j depends only on O_1..O_{j-1} and O_j
      CHECK(a.influence == b.influence);
      CHECK(a.sigma == b.sigma);
    }
    ++checked;
  }
  CHECK(checked >= 80);
}

TEST_CASE("estimate stays within the recorded influence range") {
  const Dataset data = sample(DgpKind::DiscreteExceptional, 600, 8);
  OnlineOptions opts;
  opts.keep_per_term_log = true;
  const OnlineValueEstimate est =
      online_one_step(data, build_chunk_schedule(600, 100), npmle_learner(), opts);
  double lo = est.per_term_log.front().influence, hi = lo;
  for (const PerTermEntry& e : est.per_term_log) {
    lo = std::min(lo, e.influence);
    hi = std::max(hi, e.influence);
  }
  CHECK(est.psi_hat >= lo);
  CHECK(est.psi_hat <= hi);
  // bounded terms, floored sigma: the standardized terms are bounded too
  CHECK(est.max_abs_standardized <= (1.0 / 0.2 + 1.0) / std::sqrt(opts.sigma_floor));
}

TEST_CASE("interval arithmetic follows the normal quantile") {
  OnlineValueEstimate est;
  est.psi_hat = 0.0;
  est.gamma_n = 2.0;
  est.n = 1000;
  est.ell_n = 100;
  est.se = 1.0 / (est.gamma_n * std::sqrt(900.0));
  const ConfidenceInterval ci = two_sided_ci(est, 0.05);
  CHECK(ci.upper == Catch::Approx(1.959964 * 0.5 / 30.0).margin(1e-6));
  CHECK(ci.lower == Catch::Approx(-ci.upper).margin(1e-12));

  const ConfidenceInterval tight = two_sided_ci(est, 0.9999);
  CHECK(tight.width() < 1e-4 * ci.width());

  // the one-sided bound is the lower endpoint of the 1 - 2*alpha interval
  CHECK(lower_bound(est, 0.025) == Catch::Approx(two_sided_ci(est, 0.05).lower).margin(1e-15));
  OnlineValueEstimate unit;
  unit.psi_hat = 0.3;
  unit.gamma_n = 1.0;
  unit.n = 200;
  unit.ell_n = 100;
  unit.se = 0.1;
  CHECK(lower_bound(unit, 0.05) == Catch::Approx(0.3 - 0.164485).margin(1e-6));

  CHECK_THROWS_AS(two_sided_ci(est, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(two_sided_ci(est, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(lower_bound(est, 0.6), std::invalid_argument);
}

TEST_CASE("runs are bit-identical for identical inputs") {
  const Dataset data = sample(DgpKind::DiscreteExceptional, 500, 44);
  const ChunkSchedule sched = build_chunk_schedule(500, 50);
  OnlineOptions opts;
  opts.seed = 9;
  const OnlineValueEstimate a = online_one_step(data, sched, npmle_learner(), opts);
  const OnlineValueEstimate b = online_one_step(data, sched, npmle_learner(), opts);
  CHECK(a.psi_hat == b.psi_hat);
  CHECK(a.gamma_n == b.gamma_n);
  CHECK(a.se == b.se);
}

TEST_CASE("estimates concentrate near the discrete design's optimal value") {
  int close = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    const Dataset data = sample(DgpKind::DiscreteExceptional, 4000, 500 + s);
    try {
      const OnlineValueEstimate est =
          online_one_step(data, build_chunk_schedule(4000, 100), npmle_learner());
      if (std::fabs(est.psi_hat - 0.45) < 0.05) ++close;
    } catch (const std::exception&) {
    }
  }
  CHECK(close >= 38);
}

TEST_CASE("classical one-step is the plain influence average") {
  const DgpKind kind = DgpKind::DiscreteExceptional;
  const OracleTruth truth = oracle(kind);
  const NuisanceLearner fixed{"oracle", [&truth](const Dataset&, std::uint64_t) {
                                return truth.as_model();
                              }};
  const Dataset data = sample(kind, 300, 6);
  const ClassicalEstimate est = classical_one_step(data, fixed);
  std::vector<double> terms;
  const NuisanceModel model = truth.as_model();
  for (const Observation& o : data.records) terms.push_back(influence_term(model, o));
  CHECK(est.psi_hat == Catch::Approx(mean(terms)).margin(1e-12));
  CHECK(est.se == Catch::Approx(sample_sd(terms) / std::sqrt(300.0)).margin(1e-12));
  CHECK(wald_lower_bound(est, 0.025) == Catch::Approx(wald_ci(est, 0.05).lower).margin(1e-15));
}

TEST_CASE("learner failures carry the failing block") {
  const NuisanceLearner broken{"broken", [](const Dataset& d, std::uint64_t) -> NuisanceModel {
                                 if (d.size() > 150) throw std::runtime_error("boom");
                                 return oracle(DgpKind::DiscreteExceptional).as_model();
                               }};
  const Dataset data = sample(DgpKind::DiscreteExceptional, 400, 2);
  try {
    online_one_step(data, build_chunk_schedule(400, 100), broken);
    FAIL("expected LearnerError");
  } catch (const LearnerError& e) {
    CHECK(e.block_index >= 1);
  }
}
