#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "optvalue/model.hpp"
#include "optvalue/rng.hpp"

namespace optvalue {

// K(u) = (3/4)(1 - u^2) I(|u| <= 1)
inline double epanechnikov(double u) {
  return std::fabs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

// Nadaraya-Watson regression of y on x for one treatment arm. Training
// points are sorted once; prediction uses the kernel window located by
// binary search, with windowed prefix sums for large windows. The
// Epanechnikov weight is quadratic in x inside the window, so the
// weighted sums reduce to moments sum(x^k) and sum(y x^k), k = 0,1,2.
class ArmRegression {
 public:
  ArmRegression() = default;

  ArmRegression(std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("ArmRegression: size mismatch");
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    x_.reserve(x.size());
    y_.reserve(y.size());
    for (std::size_t i : order) {
      x_.push_back(x[i]);
      y_.push_back(y[i]);
    }
    const std::size_t n = x_.size();
    s0_.assign(n + 1, 0.0);
    s1_.assign(n + 1, 0.0);
    s2_.assign(n + 1, 0.0);
    t0_.assign(n + 1, 0.0);
    t1_.assign(n + 1, 0.0);
    t2_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = x_[i], yi = y_[i];
      s0_[i + 1] = s0_[i] + 1.0;
      s1_[i + 1] = s1_[i] + xi;
      s2_[i + 1] = s2_[i] + xi * xi;
      t0_[i + 1] = t0_[i] + yi;
      t1_[i + 1] = t1_[i] + yi * xi;
      t2_[i + 1] = t2_[i] + yi * xi * xi;
    }
  }

  bool empty() const { return x_.empty(); }
  std::size_t size() const { return x_.size(); }

  // Kernel-weighted mean of y at query q with bandwidth h. An empty
  // window falls back to the nearest training point in this arm
  // (equivalent to expanding h at q until one point enters).
  double predict(double q, double h) const {
    if (x_.empty()) throw std::invalid_argument("ArmRegression: no training points");
    const auto lo_it = std::lower_bound(x_.begin(), x_.end(), q - h);
    const auto hi_it = std::upper_bound(x_.begin(), x_.end(), q + h);
    const std::size_t lo = static_cast<std::size_t>(lo_it - x_.begin());
    const std::size_t hi = static_cast<std::size_t>(hi_it - x_.begin());
    if (hi > lo) {
      if (hi - lo > 64) {
        const double c = h * h - q * q;
        const double den = c * (s0_[hi] - s0_[lo]) + 2.0 * q * (s1_[hi] - s1_[lo]) -
                           (s2_[hi] - s2_[lo]);
        const double num = c * (t0_[hi] - t0_[lo]) + 2.0 * q * (t1_[hi] - t1_[lo]) -
                           (t2_[hi] - t2_[lo]);
        if (den > 0.0) return num / den;
        // window points all sit on the kernel boundary; fall through
      }
      double num = 0.0, den = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        const double w = epanechnikov((q - x_[i]) / h);
        num += w * y_[i];
        den += w;
      }
      if (den > 0.0) return num / den;
    }
    return nearest_y(q);
  }

  double nearest_distance(double q) const {
    if (x_.empty()) throw std::invalid_argument("ArmRegression: no training points");
    const auto it = std::lower_bound(x_.begin(), x_.end(), q);
    double best = std::numeric_limits<double>::infinity();
    if (it != x_.end()) best = std::min(best, *it - q);
    if (it != x_.begin()) best = std::min(best, q - *(it - 1));
    return best;
  }

 private:
  double nearest_y(double q) const {
    const auto it = std::lower_bound(x_.begin(), x_.end(), q);
    if (it == x_.end()) return y_.back();
    if (it == x_.begin()) return y_.front();
    const std::size_t right = static_cast<std::size_t>(it - x_.begin());
    // ties prefer the left neighbor
    return (q - x_[right - 1]) <= (x_[right] - q) ? y_[right - 1] : y_[right];
  }

  std::vector<double> x_, y_;
  std::vector<double> s0_, s1_, s2_;  // moments of x
  std::vector<double> t0_, t1_, t2_;  // moments of y*x^k
};

// Candidate bandwidths for cross-validation. The default grid is
// 0.01, 0.02, ..., 0.20 with 10 folds.
struct BandwidthGrid {
  std::vector<double> candidates;
  int folds = 10;

  void validate() const {
    if (candidates.empty()) throw std::invalid_argument("BandwidthGrid: empty grid");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!(candidates[i] > 0.0)) throw std::invalid_argument("BandwidthGrid: h must be > 0");
      if (i > 0 && !(candidates[i] > candidates[i - 1])) {
        throw std::invalid_argument("BandwidthGrid: candidates must be strictly increasing");
      }
    }
    if (folds < 2) throw std::invalid_argument("BandwidthGrid: folds >= 2");
  }

  static BandwidthGrid default_grid() {
    BandwidthGrid g;
    for (int i = 1; i <= 20; ++i) g.candidates.push_back(0.01 * i);
    g.folds = 10;
    return g;
  }
};

// Difference of treated and control kernel-weighted outcome means.
class KernelBlipFit {
 public:
  KernelBlipFit(const Dataset& data, double h) : h_(h), training_size_(data.size()) {
    if (data.covariate_kind != CovariateKind::Continuous) {
      throw std::invalid_argument("KernelBlipFit: requires continuous covariates");
    }
    if (!(h > 0.0)) throw std::invalid_argument("KernelBlipFit: h must be > 0");
    std::vector<double> xt, yt, xc, yc;
    for (const Observation& o : data.records) {
      if (o.a == 1) {
        xt.push_back(position(o.w));
        yt.push_back(o.y);
      } else {
        xc.push_back(position(o.w));
        yc.push_back(o.y);
      }
    }
    if (xt.empty() || xc.empty()) {
      throw std::invalid_argument("KernelBlipFit: an arm has no training observations");
    }
    treated_ = ArmRegression(std::move(xt), std::move(yt));
    control_ = ArmRegression(std::move(xc), std::move(yc));
  }

  double bandwidth() const { return h_; }
  std::size_t training_size() const { return training_size_; }

  double predict(double w) const {
    return treated_.predict(w, h_) - control_.predict(w, h_);
  }

 private:
  double h_;
  std::size_t training_size_;
  ArmRegression treated_, control_;
};

// Conditional mean and propensity used by the cross-validation loss and,
// in oracle mode, injected directly into the influence term.
struct OutcomeOracle {
  std::function<double(int a, double w)> q_bar;
  std::function<double(int a, double w)> g;
};

// 10-fold CV over the bandwidth grid with the doubly robust pseudo-outcome
// loss. Fold assignment is contiguous blocks after a seeded shuffle; the
// returned value is always a grid member, ties going to the smallest h.
inline double cv_select_bandwidth(const Dataset& data, const BandwidthGrid& grid,
                                  const OutcomeOracle& oracle, std::uint64_t seed) {
  grid.validate();
  if (data.covariate_kind != CovariateKind::Continuous) {
    throw std::invalid_argument("cv_select_bandwidth: requires continuous covariates");
  }
  const std::size_t n = data.size();
  const std::size_t folds = static_cast<std::size_t>(grid.folds);
  if (n < folds) throw std::invalid_argument("cv_select_bandwidth: fewer observations than folds");
  if (grid.candidates.size() == 1) return grid.candidates.front();

  // pseudo-outcome (2a-1)/g(a|w) (y - Qbar(a,w)) + Qbar(1,w) - Qbar(0,w)
  std::vector<double> pseudo(n), w(n);
  std::vector<int> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Observation& o = data.records[i];
    w[i] = position(o.w);
    a[i] = o.a;
    const double ga = oracle.g(o.a, w[i]);
    pseudo[i] = (2.0 * o.a - 1.0) / ga * (o.y - oracle.q_bar(o.a, w[i])) +
                oracle.q_bar(1, w[i]) - oracle.q_bar(0, w[i]);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, stream_id(0, RngPurpose::Folds));
  deterministic_shuffle(order, rng);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos * folds / n;

  // arm fits per fold are bandwidth-independent; build them once
  std::vector<ArmRegression> treated(folds), control(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<double> xt, yt, xc, yc;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) continue;
      if (a[i] == 1) {
        xt.push_back(w[i]);
        yt.push_back(data.records[i].y);
      } else {
        xc.push_back(w[i]);
        yc.push_back(data.records[i].y);
      }
    }
    if (xt.empty() || xc.empty()) {
      throw std::invalid_argument("cv_select_bandwidth: a training arm is empty in some fold");
    }
    treated[f] = ArmRegression(std::move(xt), std::move(yt));
    control[f] = ArmRegression(std::move(xc), std::move(yc));
  }

  double best_h = grid.candidates.front();
  double best_risk = std::numeric_limits<double>::infinity();
  for (double h : grid.candidates) {
    double risk = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      for (std::size_t i = 0; i < n; ++i) {
        if (fold_of[i] != f) continue;
        const double blip = treated[f].predict(w[i], h) - control[f].predict(w[i], h);
        const double r = pseudo[i] - blip;
        risk += r * r;
      }
    }
    if (risk < best_risk) {
      best_risk = risk;
      best_h = h;
    }
  }
  return best_h;
}

// Learner matching the continuous-covariate simulations: Qbar and g are
// supplied (oracle or estimated stand-ins) while the rule comes from the
// kernel blip fit, with the bandwidth either fixed or CV-selected per fit.
inline NuisanceLearner kernel_rule_learner(OutcomeOracle oracle, BandwidthGrid grid,
                                           std::optional<double> fixed_bandwidth = {}) {
  grid.validate();
  return NuisanceLearner{
      "kernel-rule",
      [oracle = std::move(oracle), grid = std::move(grid), fixed_bandwidth](
          const Dataset& data, std::uint64_t seed) {
        const double h = fixed_bandwidth ? *fixed_bandwidth
                                         : cv_select_bandwidth(data, grid, oracle, seed);
        auto fit = std::make_shared<KernelBlipFit>(data, h);
        NuisanceModel m;
        m.q_bar = [oracle](int a, const Covariate& w) { return oracle.q_bar(a, position(w)); };
        m.g = [oracle](int a, const Covariate& w) { return oracle.g(a, position(w)); };
        m.blip = [fit](const Covariate& w) { return fit->predict(position(w)); };
        m.rule = rule_from_blip(m.blip);
        return m;
      }};
}

// Fully estimated continuous learner for real data: per-arm NW outcome
// regressions, kernel-smoothed propensity (clamped away from 0 and 1),
// and CV bandwidth selection against pilot stand-ins.
inline NuisanceLearner kernel_plug_in_learner(BandwidthGrid grid) {
  grid.validate();
  return NuisanceLearner{
      "kernel-plug-in",
      [grid = std::move(grid)](const Dataset& data, std::uint64_t seed) {
        std::vector<double> xt, yt, xc, yc, xall, aall;
        for (const Observation& o : data.records) {
          const double w = position(o.w);
          xall.push_back(w);
          aall.push_back(static_cast<double>(o.a));
          if (o.a == 1) {
            xt.push_back(w);
            yt.push_back(o.y);
          } else {
            xc.push_back(w);
            yc.push_back(o.y);
          }
        }
        if (xt.empty() || xc.empty()) {
          throw std::invalid_argument("kernel_plug_in_learner: an arm has no observations");
        }
        auto treated = std::make_shared<ArmRegression>(std::move(xt), std::move(yt));
        auto control = std::make_shared<ArmRegression>(std::move(xc), std::move(yc));
        auto propensity = std::make_shared<ArmRegression>(std::move(xall), std::move(aall));

        const double pilot_h = grid.candidates[grid.candidates.size() / 2];
        // the propensity is smooth and sits inside 1/g, so a narrow window
        // (single-arm, clamped) would dominate the influence terms; keep its
        // bandwidth wide and its predictions well inside (0, 1)
        const double g_floor_h = std::max(0.2, grid.candidates.back());
        auto clamp_g = [](double g1, int a) {
          g1 = std::clamp(g1, 0.05, 0.95);
          return a == 1 ? g1 : 1.0 - g1;
        };
        OutcomeOracle stand_in;
        stand_in.q_bar = [treated, control, pilot_h](int a, double w) {
          return a == 1 ? treated->predict(w, pilot_h) : control->predict(w, pilot_h);
        };
        stand_in.g = [propensity, g_floor_h, clamp_g](int a, double w) {
          return clamp_g(propensity->predict(w, g_floor_h), a);
        };
        const double h = grid.candidates.size() == 1
                             ? grid.candidates.front()
                             : cv_select_bandwidth(data, grid, stand_in, seed);

        NuisanceModel m;
        m.q_bar = [treated, control, h](int a, const Covariate& w) {
          return a == 1 ? treated->predict(position(w), h) : control->predict(position(w), h);
        };
        m.g = [propensity, g_floor_h, clamp_g](int a, const Covariate& w) {
          return clamp_g(propensity->predict(position(w), g_floor_h), a);
        };
        m.blip = [treated, control, h](const Covariate& w) {
          return treated->predict(position(w), h) - control->predict(position(w), h);
        };
        m.rule = rule_from_blip(m.blip);
        return m;
      }};
}

}  // namespace optvalue
