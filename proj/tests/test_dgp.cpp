#include <array>
#include <catch2/catch_amalgamated.hpp>

#include "optvalue/dgp.hpp"

using namespace optvalue;

TEST_CASE("sampling matches the stated distributions") {
  const Dataset de = sample(DgpKind::DiscreteExceptional, 100000, 1);
  std::array<double, 4> counts{};
  double w3 = 0.0, w3_treated = 0.0;
  for (const Observation& o : de.records) {
    counts[static_cast<std::size_t>(stratum(o.w))] += 1.0;
    if (stratum(o.w) == 3) {
      w3 += 1.0;
      if (o.a == 1) w3_treated += 1.0;
    }
  }
  for (double c : counts) CHECK(c / 100000.0 == Catch::Approx(0.25).margin(0.01));
  CHECK(w3_treated / w3 == Catch::Approx(0.8).margin(0.01));

  const Dataset ce = sample(DgpKind::ContinuousExceptional, 100000, 2);
  double control_sum = 0.0, control_n = 0.0;
  for (const Observation& o : ce.records) {
    CHECK(position(o.w) >= -1.0);
    CHECK(position(o.w) <= 1.0);
    if (o.a == 0) {
      control_sum += o.y;
      control_n += 1.0;
    }
  }
  CHECK(control_sum / control_n == Catch::Approx(0.3).margin(0.005));
}

TEST_CASE("oracle optimal values") {
  CHECK(oracle(DgpKind::DiscreteExceptional).optimal_value == Catch::Approx(0.45).margin(1e-14));
  // 0.3 + (1/2)(1/64): only the w < -1/2 branch contributes positive blip
  CHECK(oracle(DgpKind::ContinuousExceptional).optimal_value ==
        Catch::Approx(0.3078125).margin(1e-12));
  // segment-wise integration of the printed formulas, frozen
  CHECK(oracle(DgpKind::ContinuousNonExceptional).optimal_value ==
        Catch::Approx(0.3 + 457.0 / 2592.0).margin(1e-9));
}

TEST_CASE("smooth design's oracle agrees with direct monte carlo") {
  const OracleTruth truth = oracle(DgpKind::ContinuousNonExceptional);
  CounterRng rng(2024, 1);
  const std::size_t draws = 2000000;
  double s = 0.0, ssq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double w = 2.0 * rng.next_double() - 1.0;
    const double v = 0.3 + std::max(truth.blip0(Covariate{w}), 0.0);
    s += v;
    ssq += v * v;
  }
  const double mc = s / draws;
  const double se = std::sqrt((ssq / draws - mc * mc) / draws);
  CHECK(std::fabs(mc - truth.optimal_value) < 4.0 * se);
}

TEST_CASE("blip and conditional variance are consistent closed forms") {
  for (DgpKind kind : {DgpKind::DiscreteExceptional, DgpKind::ContinuousNonExceptional,
                       DgpKind::ContinuousExceptional}) {
    const OracleTruth truth = oracle(kind);
    for (int i = 0; i <= 40; ++i) {
      const Covariate w = kind == DgpKind::DiscreteExceptional
                              ? Covariate{i % 4}
                              : Covariate{-1.0 + 0.05 * i};
      CHECK(truth.blip0(w) ==
            Catch::Approx(truth.q_bar0(1, w) - truth.q_bar0(0, w)).margin(1e-14));
      CHECK(truth.g0(1, w) + truth.g0(0, w) == Catch::Approx(1.0).margin(1e-14));
      for (int a = 0; a < 2; ++a) {
        const double q = truth.q_bar0(a, w);
        CHECK(truth.cond_var0(a, w) == Catch::Approx(q * (1.0 - q)).margin(1e-14));
        CHECK(q >= 0.0);
        CHECK(q <= 1.0);
      }
    }
  }
}

TEST_CASE("value of simple rules") {
  const TreatmentRule always{[](const Covariate&) { return 1; }};
  const TreatmentRule never{[](const Covariate&) { return 0; }};
  CHECK(value_of_rule(DgpKind::DiscreteExceptional, always) == Catch::Approx(0.45).margin(1e-14));
  CHECK(value_of_rule(DgpKind::ContinuousNonExceptional, never) ==
        Catch::Approx(0.3).margin(1e-12));
  CHECK(value_of_rule(DgpKind::ContinuousExceptional, never) == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("no rule beats the oracle rule") {
  CounterRng rng(55, 1);
  for (DgpKind kind : {DgpKind::DiscreteExceptional, DgpKind::ContinuousNonExceptional,
                       DgpKind::ContinuousExceptional}) {
    const OracleTruth truth = oracle(kind);
    CHECK(value_of_rule(kind, truth.optimal_rule) ==
          Catch::Approx(truth.optimal_value).margin(1e-8));
    for (int trial = 0; trial < 10; ++trial) {
      const double shift = 0.4 * rng.next_double() - 0.2;
      const double tilt = 0.4 * rng.next_double() - 0.2;
      const TreatmentRule perturbed = rule_from_blip([&truth, shift, tilt](const Covariate& w) {
        return truth.blip0(w) + shift + tilt * covariate_numeric(w);
      });
      CHECK(value_of_rule(kind, perturbed) <= truth.optimal_value + 1e-8);
    }
  }
}

TEST_CASE("exceptional-law diagnosis with witnesses") {
  const ExceptionalDiagnosis de = is_exceptional(DgpKind::DiscreteExceptional);
  CHECK(de.exceptional);
  CHECK(de.witness_strata == std::vector<int>{1, 2, 3});
  CHECK(de.probability_mass == Catch::Approx(0.75));

  const ExceptionalDiagnosis cne = is_exceptional(DgpKind::ContinuousNonExceptional);
  CHECK_FALSE(cne.exceptional);

  const ExceptionalDiagnosis ce = is_exceptional(DgpKind::ContinuousExceptional);
  CHECK(ce.exceptional);
  CHECK(ce.witness_lo == Catch::Approx(-0.5).margin(1e-3));
  CHECK(ce.witness_hi == Catch::Approx(1.0 / 3.0).margin(1e-3));
  CHECK(ce.probability_mass == Catch::Approx(5.0 / 12.0).margin(1e-3));
}

namespace {

// P(0 < |blip0(W)| <= t): boundaries of {|blip0| <= t} located by scan plus
// bisection, zero-blip runs subtracted via the diagnostic's mass.
double near_boundary_mass(DgpKind kind, double t) {
  const OracleTruth truth = oracle(kind);
  auto inside = [&](double w) {
    const double b = std::fabs(truth.blip0(Covariate{w}));
    return b <= t;
  };
  constexpr int kScan = 200000;
  double mass = 0.0;
  double run_start = -1.0;
  bool in_run = inside(-1.0);
  if (in_run) run_start = -1.0;
  for (int i = 1; i <= kScan; ++i) {
    const double w = -1.0 + 2.0 * i / kScan;
    const bool cur = inside(w);
    if (cur != in_run) {
      double lo = w - 2.0 / kScan, hi = w;
      for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (inside(mid) == in_run) lo = mid; else hi = mid;
      }
      const double edge = 0.5 * (lo + hi);
      if (in_run) {
        mass += edge - run_start;
      } else {
        run_start = edge;
      }
      in_run = cur;
    }
  }
  if (in_run) mass += 1.0 - run_start;
  return mass / 2.0 - is_exceptional(kind).probability_mass;
}

}  // namespace

TEST_CASE("margin inequality bounds the regret of perturbed rules") {
  const DgpKind kind = DgpKind::ContinuousExceptional;
  const OracleTruth truth = oracle(kind);
  for (double eps : {0.01, 0.05, 0.1}) {
    // perturbation eps * w has sup norm exactly eps on [-1, 1]
    const TreatmentRule rule = rule_from_blip([&truth, eps](const Covariate& w) {
      return truth.blip0(w) + eps * position(w);
    });
    const double regret = truth.optimal_value - value_of_rule(kind, rule);
    const double bound = eps * near_boundary_mass(kind, eps);
    CHECK(regret >= -1e-8);
    CHECK(regret <= bound + 1e-8);
  }
}
