#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace optvalue {

// Gauss-Legendre nodes/weights on [-1,1], computed by Newton iteration on
// the Legendre recurrence.
class QuadratureRule {
 public:
  explicit QuadratureRule(int order) {
    if (order < 1) throw std::invalid_argument("QuadratureRule: order >= 1");
    nodes_.resize(order);
    weights_.resize(order);
    const int n = order;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      // Chebyshev-based initial guess
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-15) break;
      }
      const double w = 2.0 / ((1.0 - x * x) * dp * dp);
      nodes_[i] = -x;
      nodes_[n - 1 - i] = x;
      weights_[i] = w;
      weights_[n - 1 - i] = w;
    }
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      sum += weights_[i] * f(mid + half * nodes_[i]);
    }
    return half * sum;
  }

  // Integrates over [breakpoints.front(), breakpoints.back()] segment by
  // segment; breakpoints must be sorted. Exact (up to rounding) for
  // integrands that are polynomial within each segment.
  template <class F>
  double integrate_piecewise(F&& f, const std::vector<double>& breakpoints) const {
    if (breakpoints.size() < 2) {
      throw std::invalid_argument("integrate_piecewise: need >= 2 breakpoints");
    }
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s) {
      if (breakpoints[s + 1] > breakpoints[s]) {
        total += integrate(f, breakpoints[s], breakpoints[s + 1]);
      }
    }
    return total;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

}  // namespace optvalue
