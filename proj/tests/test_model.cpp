#include <catch2/catch_amalgamated.hpp>

#include "optvalue/model.hpp"
#include "optvalue/rng.hpp"

using namespace optvalue;

namespace {

NuisanceModel constant_model(double q_treated, double q_control, double g1, int decision) {
  NuisanceModel m;
  m.q_bar = [q_treated, q_control](int a, const Covariate&) {
    return a == 1 ? q_treated : q_control;
  };
  m.g = [g1](int a, const Covariate&) { return a == 1 ? g1 : 1.0 - g1; };
  m.blip = [q_treated, q_control](const Covariate&) { return q_treated - q_control; };
  m.rule = TreatmentRule{[decision](const Covariate&) { return decision; }};
  return m;
}

}  // namespace

TEST_CASE("influence term matches hand-computed values") {
  // zero regression reduces the term to y / g
  const NuisanceModel zero = constant_model(0.0, 0.0, 0.5, 1);
  CHECK(influence_term(zero, Observation(Covariate{0.0}, 1, 1.0)) == Catch::Approx(2.0));

  // zero residual leaves only the regression at the rule's arm
  const NuisanceModel fitted = constant_model(0.7, 0.2, 0.4, 1);
  CHECK(influence_term(fitted, Observation(Covariate{0.0}, 1, 0.7)) == Catch::Approx(0.7));

  // w = 0 stratum of the discrete design: (1/0.5)(1 - 0.6) + 0.6 = 1.4
  const NuisanceModel de = constant_model(0.6, 0.4, 0.5, 1);
  CHECK(influence_term(de, Observation(Covariate{0}, 1, 1.0)) == Catch::Approx(1.4));
}

TEST_CASE("off-rule observations contribute only the regression term") {
  CounterRng rng(3, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const double qt = rng.next_double(), qc = rng.next_double();
    const double g1 = 0.1 + 0.8 * rng.next_double();
    const int d = static_cast<int>(rng.below(2));
    const NuisanceModel m = constant_model(qt, qc, g1, d);
    const Observation o(Covariate{0.0}, 1 - d, rng.next_double());
    CHECK(influence_term(m, o) == (d == 1 ? qt : qc));
  }
}

TEST_CASE("influence term obeys the bounded-propensity tail bound") {
  const double delta = 0.2;
  CounterRng rng(9, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const double qt = rng.next_double(), qc = rng.next_double();
    const double g1 = delta + (1.0 - 2.0 * delta) * rng.next_double();
    const int d = static_cast<int>(rng.below(2));
    const NuisanceModel m = constant_model(qt, qc, g1, d);
    const Observation o(Covariate{0.0}, static_cast<int>(rng.below(2)), rng.next_double());
    CHECK(std::fabs(influence_term(m, o)) <= 1.0 / delta + 1.0);
  }
}

TEST_CASE("propensity at or below the floor is rejected") {
  const NuisanceModel m = constant_model(0.5, 0.5, 1e-7, 1);
  CHECK_THROWS_AS(influence_term(m, Observation(Covariate{0.0}, 1, 1.0)), PositivityError);
  // the untreated arm has propensity ~1 and is fine
  CHECK_NOTHROW(influence_term(m, Observation(Covariate{0.0}, 0, 1.0)));
}

TEST_CASE("rule from blip treats on strictly positive blip only") {
  const TreatmentRule r = rule_from_blip([](const Covariate& w) { return position(w); });
  CHECK(r.decide(Covariate{0.2}) == 1);
  CHECK(r.decide(Covariate{0.0}) == 0);
  CHECK(r.decide(Covariate{-0.1}) == 0);
}

TEST_CASE("negated blip flips decisions exactly off the zero set") {
  auto blip = [](const Covariate& w) { return position(w) - 0.25; };
  const TreatmentRule r = rule_from_blip(blip);
  const TreatmentRule nr = rule_from_blip([blip](const Covariate& w) { return -blip(w); });
  for (int i = 0; i <= 100; ++i) {
    const Covariate w{-1.0 + 0.02 * i};
    if (blip(w) != 0.0) {
      CHECK(r.decide(w) != nr.decide(w));
    } else {
      CHECK(r.decide(w) == 0);
      CHECK(nr.decide(w) == 0);
    }
  }
}

TEST_CASE("observation validation and dataset prefix") {
  CHECK_THROWS_AS(Observation(Covariate{0}, 2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(Observation(Covariate{0}, 1, std::nan("")), std::invalid_argument);

  Dataset d;
  d.covariate_kind = CovariateKind::Discrete;
  for (int i = 0; i < 5; ++i) d.records.emplace_back(Covariate{i}, i % 2, 1.0 * i);
  const Dataset p = d.prefix(3);
  REQUIRE(p.size() == 3);
  CHECK(p.covariate_kind == CovariateKind::Discrete);
  CHECK(stratum(p.records[2].w) == 2);
}
