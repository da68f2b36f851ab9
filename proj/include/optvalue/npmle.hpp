#pragma once

#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "optvalue/model.hpp"

namespace optvalue {

// A queried stratum lacks treated or control observations (or was never
// seen). Callers decide the fallback; see the bootstrap module.
struct IllDefinedNpmle : std::runtime_error {
  int stratum_label;
  IllDefinedNpmle(int label, const std::string& what)
      : std::runtime_error(what), stratum_label(label) {}
};

// Cell counts and outcome sums per discrete stratum; plug-in estimates of
// Qbar, g, the blip, and the induced rule are exact sample statistics.
class NpmleFit {
 public:
  struct Cell {
    std::size_t n = 0;
    std::size_t n_treated = 0;
    double sum_y_treated = 0.0;
    double sum_y_control = 0.0;
  };

  explicit NpmleFit(const Dataset& data) {
    if (data.covariate_kind != CovariateKind::Discrete) {
      throw std::invalid_argument("NpmleFit: requires discrete covariates");
    }
    if (data.records.empty()) throw std::invalid_argument("NpmleFit: empty data");
    n_ = data.size();
    for (const Observation& o : data.records) {
      Cell& c = strata_[stratum(o.w)];
      ++c.n;
      if (o.a == 1) {
        ++c.n_treated;
        c.sum_y_treated += o.y;
      } else {
        c.sum_y_control += o.y;
      }
    }
  }

  std::size_t sample_size() const { return n_; }
  const std::map<int, Cell>& strata() const { return strata_; }

  double q_bar(int a, int w) const {
    const Cell& c = cell(w);
    const std::size_t n_arm = a == 1 ? c.n_treated : c.n - c.n_treated;
    if (n_arm == 0) {
      std::ostringstream msg;
      msg << "NPMLE ill-defined: stratum " << w << " has no "
          << (a == 1 ? "treated" : "control") << " observations";
      throw IllDefinedNpmle(w, msg.str());
    }
    const double sum = a == 1 ? c.sum_y_treated : c.sum_y_control;
    return sum / static_cast<double>(n_arm);
  }

  double g1(int w) const {
    const Cell& c = cell(w);
    return static_cast<double>(c.n_treated) / static_cast<double>(c.n);
  }

  double blip(int w) const { return q_bar(1, w) - q_bar(0, w); }

  double p_hat(int w) const {
    const Cell& c = cell(w);
    return static_cast<double>(c.n) / static_cast<double>(n_);
  }

  // Plug-in value of the fitted rule: sum_w p(w) Qbar(d(w), w).
  double plug_in_value() const {
    double total = 0.0;
    for (const auto& [w, c] : strata_) {
      const int d = blip(w) > 0.0 ? 1 : 0;
      total += p_hat(w) * q_bar(d, w);
    }
    return total;
  }

  NuisanceModel as_model() const {
    auto self = std::make_shared<NpmleFit>(*this);
    NuisanceModel m;
    m.q_bar = [self](int a, const Covariate& w) { return self->q_bar(a, stratum(w)); };
    m.g = [self](int a, const Covariate& w) {
      const double g1 = self->g1(stratum(w));
      return a == 1 ? g1 : 1.0 - g1;
    };
    m.blip = [self](const Covariate& w) { return self->blip(stratum(w)); };
    m.rule = rule_from_blip(m.blip);
    return m;
  }

 private:
  const Cell& cell(int w) const {
    auto it = strata_.find(w);
    if (it == strata_.end()) {
      std::ostringstream msg;
      msg << "NPMLE ill-defined: stratum " << w << " not observed";
      throw IllDefinedNpmle(w, msg.str());
    }
    return it->second;
  }

  std::map<int, Cell> strata_;
  std::size_t n_ = 0;
};

inline NuisanceLearner npmle_learner() {
  return NuisanceLearner{
      "npmle", [](const Dataset& data, std::uint64_t) { return NpmleFit(data).as_model(); }};
}

}  // namespace optvalue
