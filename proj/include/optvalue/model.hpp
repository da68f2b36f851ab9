#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace optvalue {

// Covariate is either an integer stratum label (discrete designs) or a
// real position in a bounded interval (continuous designs). The tagged
// union forces learners to declare which support they handle.
using Covariate = std::variant<int, double>;

enum class CovariateKind { Discrete, Continuous };

inline int stratum(const Covariate& w) { return std::get<int>(w); }
inline double position(const Covariate& w) { return std::get<double>(w); }

inline double covariate_numeric(const Covariate& w) {
  if (std::holds_alternative<int>(w)) return static_cast<double>(std::get<int>(w));
  return std::get<double>(w);
}

struct Observation {
  Covariate w;
  int a;     // binary treatment, 0 or 1
  double y;  // real outcome

  Observation(Covariate w_, int a_, double y_) : w(w_), a(a_), y(y_) {
    if (a != 0 && a != 1) throw std::invalid_argument("Observation: a must be 0 or 1");
    if (!std::isfinite(y)) throw std::invalid_argument("Observation: y must be finite");
  }
};

// Ordered sample; order matters because the online estimator is
// order-dependent.
struct Dataset {
  std::vector<Observation> records;
  CovariateKind covariate_kind = CovariateKind::Continuous;

  std::size_t size() const { return records.size(); }

  Dataset prefix(std::size_t k) const {
    Dataset d;
    d.covariate_kind = covariate_kind;
    d.records.assign(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(k));
    return d;
  }
};

// Deterministic map from covariate to a treatment arm.
struct TreatmentRule {
  std::function<int(const Covariate&)> decide;
};

// d(w) = 1 iff blip(w) > 0; ties assign control, matching the strict
// inequality in the rule definition.
inline TreatmentRule rule_from_blip(std::function<double(const Covariate&)> blip) {
  return TreatmentRule{[blip = std::move(blip)](const Covariate& w) {
    return blip(w) > 0.0 ? 1 : 0;
  }};
}

// Outcome regression, treatment mechanism, blip, and the induced rule.
struct NuisanceModel {
  std::function<double(int, const Covariate&)> q_bar;
  std::function<double(int, const Covariate&)> g;
  std::function<double(const Covariate&)> blip;
  TreatmentRule rule;
};

inline constexpr double kDefaultPropensityFloor = 1e-6;

struct PositivityError : std::runtime_error {
  explicit PositivityError(const std::string& what) : std::runtime_error(what) {}
};

// Uncentered influence term
//   I(a = d(w)) / g(a|w) * (y - Qbar(a,w)) + Qbar(d(w), w).
// Rejects (rather than truncates) propensities at or below the floor;
// silent truncation would mask generator or learner bugs.
inline double influence_term(const NuisanceModel& model, const Observation& o,
                             double propensity_floor = kDefaultPropensityFloor) {
  const double g_a = model.g(o.a, o.w);
  if (!(g_a > propensity_floor)) {
    std::ostringstream msg;
    msg << "influence_term: propensity " << g_a << " at or below floor "
        << propensity_floor << " for observation (w=" << covariate_numeric(o.w)
        << ", a=" << o.a << ", y=" << o.y << ")";
    throw PositivityError(msg.str());
  }
  const int d = model.rule.decide(o.w);
  double value = model.q_bar(d, o.w);
  if (o.a == d) value += (o.y - model.q_bar(o.a, o.w)) / g_a;
  return value;
}

// Strategy fitting a NuisanceModel on a data prefix; seed feeds any
// internal randomization (e.g. CV fold assignment).
struct NuisanceLearner {
  std::string name;
  std::function<NuisanceModel(const Dataset&, std::uint64_t seed)> fit;
};

}  // namespace optvalue
