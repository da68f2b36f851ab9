#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optvalue/model.hpp"
#include "optvalue/quadrature.hpp"
#include "optvalue/rng.hpp"

namespace optvalue {

// The three point-treatment simulation distributions: discrete
// exceptional, continuous non-exceptional, continuous exceptional.
enum class DgpKind { DiscreteExceptional, ContinuousNonExceptional, ContinuousExceptional };

inline std::string dgp_name(DgpKind kind) {
  switch (kind) {
    case DgpKind::DiscreteExceptional: return "d-e";
    case DgpKind::ContinuousNonExceptional: return "c-ne";
    case DgpKind::ContinuousExceptional: return "c-e";
  }
  throw std::logic_error("dgp_name: bad kind");
}

inline DgpKind dgp_from_name(const std::string& name) {
  if (name == "d-e") return DgpKind::DiscreteExceptional;
  if (name == "c-ne") return DgpKind::ContinuousNonExceptional;
  if (name == "c-e") return DgpKind::ContinuousExceptional;
  throw std::invalid_argument("unknown DGP '" + name + "' (expected d-e, c-ne, or c-e)");
}

inline CovariateKind dgp_covariate_kind(DgpKind kind) {
  return kind == DgpKind::DiscreteExceptional ? CovariateKind::Discrete
                                              : CovariateKind::Continuous;
}

namespace detail {

// P(A=1|W=w) = 0.5 + 0.1 w in every design
inline double propensity1(double w) { return 0.5 + 0.1 * w; }

inline double qbar_treated_cne(double w) {
  return w >= 0.0 ? 0.3 + (-w * w * w + w * w - w / 3.0 + 1.0 / 27.0)
                  : 0.3 + (0.75 * w * w * w + w * w - w / 3.0 + 1.0 / 27.0);
}

inline double qbar_treated_ce(double w) {
  if (w < -0.5) {
    const double t = w + 5.0 / 6.0;
    return 0.3 + (-t * t * t + t * t - t / 3.0 + 1.0 / 27.0);
  }
  if (w > 1.0 / 3.0) {
    return 0.3 + (-w * w * w + w * w - w / 3.0 + 1.0 / 27.0);
  }
  return 0.3;
}

inline double qbar0(DgpKind kind, int a, const Covariate& w) {
  switch (kind) {
    case DgpKind::DiscreteExceptional:
      return 0.4 + (a == 1 && stratum(w) == 0 ? 0.2 : 0.0);
    case DgpKind::ContinuousNonExceptional:
      return a == 1 ? qbar_treated_cne(position(w)) : 0.3;
    case DgpKind::ContinuousExceptional:
      return a == 1 ? qbar_treated_ce(position(w)) : 0.3;
  }
  throw std::logic_error("qbar0: bad kind");
}

inline double g0(DgpKind kind, int a, const Covariate& w) {
  const double g1 = propensity1(covariate_numeric(w));
  return a == 1 ? g1 : 1.0 - g1;
}

inline double blip0(DgpKind kind, const Covariate& w) {
  return qbar0(kind, 1, w) - qbar0(kind, 0, w);
}

inline double cond_var0(DgpKind kind, int a, const Covariate& w) {
  const double q = qbar0(kind, a, w);
  return q * (1.0 - q);  // binary outcome
}

// covariate piece boundaries of the outcome regressions
inline std::vector<double> piece_breakpoints(DgpKind kind) {
  switch (kind) {
    case DgpKind::ContinuousNonExceptional: return {-1.0, 0.0, 1.0 / 3.0, 1.0};
    case DgpKind::ContinuousExceptional: return {-1.0, -0.5, 1.0 / 3.0, 1.0};
    default: return {};
  }
}

}  // namespace detail

inline Dataset sample(DgpKind kind, std::size_t n, std::uint64_t seed,
                      std::uint64_t replicate = 0) {
  if (n < 1) throw std::invalid_argument("sample: n >= 1");
  CounterRng rng(seed, stream_id(replicate, RngPurpose::Sample));
  Dataset data;
  data.covariate_kind = dgp_covariate_kind(kind);
  data.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Covariate w;
    if (kind == DgpKind::DiscreteExceptional) {
      w = static_cast<int>(rng.below(4));
    } else {
      w = 2.0 * rng.next_double() - 1.0;
    }
    const int a = rng.bernoulli(detail::propensity1(covariate_numeric(w))) ? 1 : 0;
    const double y = rng.bernoulli(detail::qbar0(kind, a, w)) ? 1.0 : 0.0;
    data.records.emplace_back(w, a, y);
  }
  return data;
}

// Closed-form truths plus the derived optimal value (exact stratum sum
// for the discrete design, segment-wise Gauss-Legendre otherwise).
struct OracleTruth {
  std::function<double(int, const Covariate&)> q_bar0;
  std::function<double(int, const Covariate&)> g0;
  std::function<double(const Covariate&)> blip0;
  std::function<double(int, const Covariate&)> cond_var0;
  double optimal_value = 0.0;
  std::string zero_blip_set;
  TreatmentRule optimal_rule;

  NuisanceModel as_model() const {
    NuisanceModel m;
    m.q_bar = q_bar0;
    m.g = g0;
    m.blip = blip0;
    m.rule = optimal_rule;
    return m;
  }
};

inline OracleTruth oracle(DgpKind kind) {
  OracleTruth t;
  t.q_bar0 = [kind](int a, const Covariate& w) { return detail::qbar0(kind, a, w); };
  t.g0 = [kind](int a, const Covariate& w) { return detail::g0(kind, a, w); };
  t.blip0 = [kind](const Covariate& w) { return detail::blip0(kind, w); };
  t.cond_var0 = [kind](int a, const Covariate& w) { return detail::cond_var0(kind, a, w); };
  t.optimal_rule = rule_from_blip(t.blip0);
  if (kind == DgpKind::DiscreteExceptional) {
    double value = 0.0;
    for (int w = 0; w < 4; ++w) {
      value += 0.25 * std::max(detail::qbar0(kind, 1, w), detail::qbar0(kind, 0, w));
    }
    t.optimal_value = value;
    t.zero_blip_set = "strata {1, 2, 3}";
  } else {
    const QuadratureRule rule(64);
    const auto breaks = detail::piece_breakpoints(kind);
    t.optimal_value =
        0.3 + 0.5 * rule.integrate_piecewise(
                        [kind](double w) {
                          return std::max(detail::blip0(kind, Covariate{w}), 0.0);
                        },
                        breaks);
    t.zero_blip_set = kind == DgpKind::ContinuousNonExceptional
                          ? "the single point {1/3}"
                          : "the interval [-1/2, 1/3]";
  }
  return t;
}

namespace detail {

// Decision boundaries of an arbitrary rule, located by a fixed scan plus
// bisection on the decision; bounds the quadrature error explicitly for
// rules (e.g. kernel fits) that are not piecewise polynomial.
inline std::vector<double> decision_breakpoints(DgpKind kind, const TreatmentRule& rule) {
  constexpr int kScan = 10000;
  std::vector<double> breaks = piece_breakpoints(kind);
  auto decide = [&rule](double w) { return rule.decide(Covariate{w}); };
  int prev = decide(-1.0);
  for (int i = 1; i <= kScan; ++i) {
    const double w = -1.0 + 2.0 * i / kScan;
    const int cur = decide(w);
    if (cur != prev) {
      double lo = -1.0 + 2.0 * (i - 1) / kScan, hi = w;
      const int dlo = prev;
      for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (decide(mid) == dlo) lo = mid; else hi = mid;
      }
      breaks.push_back(0.5 * (lo + hi));
    }
    prev = cur;
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  return breaks;
}

template <class PerW>
double integrate_under_rule(DgpKind kind, const TreatmentRule& rule, PerW&& f) {
  const QuadratureRule quad(32);
  const auto breaks = decision_breakpoints(kind, rule);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    if (!(b > a)) continue;
    const int d = rule.decide(Covariate{0.5 * (a + b)});
    total += quad.integrate([&](double w) { return f(d, w); }, a, b);
  }
  return 0.5 * total;  // uniform density on (-1, 1)
}

}  // namespace detail

// Value of an arbitrary rule, E[Qbar0(rule(W), W)].
inline double value_of_rule(DgpKind kind, const TreatmentRule& rule) {
  if (kind == DgpKind::DiscreteExceptional) {
    double value = 0.0;
    for (int w = 0; w < 4; ++w) {
      value += 0.25 * detail::qbar0(kind, rule.decide(Covariate{w}), Covariate{w});
    }
    return value;
  }
  return detail::integrate_under_rule(kind, rule, [kind](int d, double w) {
    return detail::qbar0(kind, d, Covariate{w});
  });
}

// Closed-form standard deviation of the uncentered influence term under
// oracle nuisances and the given (fixed) rule.
inline double influence_sd_of_rule(DgpKind kind, const TreatmentRule& rule) {
  auto second_moment_at = [kind](int d, const Covariate& w) {
    const double q = detail::qbar0(kind, d, w);
    const double g = detail::g0(kind, d, w);
    return detail::cond_var0(kind, d, w) / g + q * q;
  };
  double m1 = value_of_rule(kind, rule);
  double m2;
  if (kind == DgpKind::DiscreteExceptional) {
    m2 = 0.0;
    for (int w = 0; w < 4; ++w) {
      m2 += 0.25 * second_moment_at(rule.decide(Covariate{w}), Covariate{w});
    }
  } else {
    m2 = detail::integrate_under_rule(kind, rule, [&](int d, double w) {
      return second_moment_at(d, Covariate{w});
    });
  }
  return std::sqrt(m2 - m1 * m1);
}

// Pathwise-differentiability diagnostic: the law is flagged when the blip
// vanishes on a positive-probability region where the conditional outcome
// variance is still positive.
struct ExceptionalDiagnosis {
  bool exceptional = false;
  std::string witness;
  std::vector<int> witness_strata;           // discrete designs
  double witness_lo = 0.0, witness_hi = 0.0;  // continuous designs
  double probability_mass = 0.0;
};

inline ExceptionalDiagnosis is_exceptional(DgpKind kind) {
  ExceptionalDiagnosis diag;
  std::ostringstream witness;
  if (kind == DgpKind::DiscreteExceptional) {
    for (int w = 0; w < 4; ++w) {
      const double blip = detail::blip0(kind, Covariate{w});
      const double maxvar = std::max(detail::cond_var0(kind, 0, Covariate{w}),
                                     detail::cond_var0(kind, 1, Covariate{w}));
      if (blip == 0.0 && maxvar > 0.0) {
        diag.witness_strata.push_back(w);
        diag.probability_mass += 0.25;
      }
    }
    diag.exceptional = !diag.witness_strata.empty();
    if (diag.exceptional) {
      witness << "strata {";
      for (std::size_t i = 0; i < diag.witness_strata.size(); ++i) {
        witness << (i ? ", " : "") << diag.witness_strata[i];
      }
      witness << "} with zero blip and positive conditional variance";
      diag.witness = witness.str();
    }
    return diag;
  }
  // continuous: detect zero-blip runs of positive length on a fixed scan
  constexpr int kScan = 20000;
  int run_start = -1;
  double best_lo = 0.0, best_hi = 0.0;
  for (int i = 0; i <= kScan; ++i) {
    const double w = -1.0 + 2.0 * i / kScan;
    const bool zero = detail::blip0(kind, Covariate{w}) == 0.0;
    if (zero && run_start < 0) run_start = i;
    if ((!zero || i == kScan) && run_start >= 0) {
      const int run_end = zero ? i : i - 1;
      if (run_end > run_start) {  // positive length, not an isolated root
        const double lo = -1.0 + 2.0 * run_start / kScan;
        const double hi = -1.0 + 2.0 * run_end / kScan;
        if (hi - lo > best_hi - best_lo) {
          best_lo = lo;
          best_hi = hi;
        }
        diag.probability_mass += (hi - lo) / 2.0;
      }
      run_start = -1;
    }
  }
  if (diag.probability_mass > 0.0) {
    const double mid = 0.5 * (best_lo + best_hi);
    const double maxvar = std::max(detail::cond_var0(kind, 0, Covariate{mid}),
                                   detail::cond_var0(kind, 1, Covariate{mid}));
    if (maxvar > 0.0) {
      diag.exceptional = true;
      diag.witness_lo = best_lo;
      diag.witness_hi = best_hi;
      witness << "w in [" << best_lo << ", " << best_hi
              << "] with zero blip and conditional variance " << maxvar;
      diag.witness = witness.str();
    }
  }
  return diag;
}

}  // namespace optvalue
