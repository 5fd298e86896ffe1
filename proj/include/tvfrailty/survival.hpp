#pragma once

// Population survivor functions under a time-varying frailty.
//
// The inner integral int_0^t u^{h(s)} lambda_0(s) / mu(s) ds is replaced by the
// right-endpoint step sum delta * sum_{i=1}^{j} u^{h(i delta)} lambda_0(i delta)
// / mu(i delta) for t = j delta. The outer expectation over U uses the
// adaptive quadrature of GenGammaQuadrature, with every requested age
// integrated on one shared set of nodes. A gamma factor V with shape k2 is
// integrated out analytically through its Laplace transform
// [k2 / (k2 + I)]^{k2}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tvfrailty/distributions.hpp"
#include "tvfrailty/errors.hpp"
#include "tvfrailty/frailty.hpp"
#include "tvfrailty/hazard.hpp"
#include "tvfrailty/quadrature.hpp"

namespace tvf {

// Grid arrays {h(i delta), mu(i delta), delta lambda_m(i delta) / mu(i delta)}
// for i = 1..J and one or more hazards sharing the same step. Immutable after
// construction.
class DiscretizedFrailty {
 public:
  DiscretizedFrailty(const FrailtySpec& spec, std::vector<const HazardSpec*> hazards,
                     std::size_t max_step)
      : spec_(spec), n_hazards_(hazards.size()), max_step_(max_step) {
    spec.validate();
    if (hazards.empty()) throw DomainError("at least one hazard is required");
    delta_ = hazards.front()->delta;
    for (const auto* hz : hazards) {
      hz->validate();
      if (std::fabs(hz->delta - delta_) > 1e-12 * delta_)
        throw DomainError("hazards must share the same grid step");
    }
    h_.resize(max_step);
    log_mu_.resize(max_step);
    coef_.assign(n_hazards_ * max_step, 0.0);
    constant_h_ = spec.modulation.is_constant();
    for (std::size_t i = 0; i < max_step; ++i) {
      const double t = static_cast<double>(i + 1) * delta_;
      h_[i] = spec.modulation(t);
      log_mu_[i] = gengamma_log_moment(spec.base, h_[i]);
      const double inv_mu = std::exp(-log_mu_[i]);
      for (std::size_t m = 0; m < n_hazards_; ++m)
        coef_[m * max_step + i] = delta_ * hazards[m]->rate(t) * inv_mu;
    }
  }

  const FrailtySpec& spec() const { return spec_; }
  double delta() const { return delta_; }
  std::size_t max_step() const { return max_step_; }
  std::size_t hazards() const { return n_hazards_; }
  double h(std::size_t step) const { return step == 0 ? 1.0 : h_[step - 1]; }
  double log_mu(std::size_t step) const { return step == 0 ? gengamma_log_moment(spec_.base, 1.0) : log_mu_[step - 1]; }

  // Walks the grid for frailty value u (given as log u), calling
  // emit(step, cumulative) at step 0 and after each step, where cumulative[m]
  // holds I_m(j delta, u). Stops after `last_step`.
  template <class Emit>
  void accumulate(double log_u, std::size_t last_step, Emit&& emit) const {
    std::vector<double> cum(n_hazards_, 0.0);
    emit(std::size_t{0}, std::span<const double>(cum));
    const double u = std::exp(log_u);
    for (std::size_t i = 0; i < last_step; ++i) {
      const double w = constant_h_ ? u : std::exp(h_[i] * log_u);
      for (std::size_t m = 0; m < n_hazards_; ++m) cum[m] += coef_[m * max_step_ + i] * w;
      emit(i + 1, std::span<const double>(cum));
    }
  }

  // Conditional probability of no event given u and cumulative I: e^{-I}, or
  // the gamma Laplace transform when V is present.
  double conditional_survival(double cumulative) const {
    if (spec_.second_component) {
      const double k2 = *spec_.second_component;
      return std::exp(-k2 * std::log1p(cumulative / k2));
    }
    return std::exp(-cumulative);
  }

 private:
  FrailtySpec spec_;
  std::size_t n_hazards_;
  std::size_t max_step_;
  double delta_ = 1.0;
  bool constant_h_ = false;
  std::vector<double> h_;
  std::vector<double> log_mu_;
  std::vector<double> coef_;
};

inline QuadratureOptions default_survival_quadrature() {
  QuadratureOptions q;
  q.rel_tol = 1e-10;
  q.abs_tol = 1e-13;
  return q;
}

// Step-function approximation of int_0^t u^{h(s)} lambda_0(s) / mu(s) ds.
inline double cumulative_weighted_hazard(const FrailtySpec& spec, const HazardSpec& hazard, double t,
                                         double u) {
  if (!(u > 0.0)) throw DomainError("cumulative_weighted_hazard: u must be positive");
  const std::size_t steps = hazard.grid_index(t);
  DiscretizedFrailty grid(spec, {&hazard}, steps);
  double result = 0.0;
  grid.accumulate(std::log(u), steps, [&](std::size_t j, std::span<const double> cum) {
    if (j == steps) result = cum[0];
  });
  return result;
}

namespace detail {

inline std::vector<std::size_t> grid_steps(const HazardSpec& hazard, std::span<const double> ages) {
  std::vector<std::size_t> steps;
  steps.reserve(ages.size());
  for (double t : ages) steps.push_back(hazard.grid_index(t));
  return steps;
}

// Orders ages by grid step so one pass of accumulate() serves them all.
struct StepOrder {
  std::vector<std::size_t> order;  // indices into ages, ascending step
  std::vector<std::size_t> steps;

  explicit StepOrder(std::vector<std::size_t> s) : steps(std::move(s)) {
    order.resize(steps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return steps[a] < steps[b]; });
  }
  std::size_t last() const { return steps.empty() ? 0 : steps[order.back()]; }
};

}  // namespace detail

// S(t) at each age for the single hazard, one- or two-component by spec.
inline std::vector<double> survivor_curve(const FrailtySpec& spec, const HazardSpec& hazard,
                                          std::span<const double> ages,
                                          const QuadratureOptions& opts = default_survival_quadrature()) {
  const detail::StepOrder so(detail::grid_steps(hazard, ages));
  DiscretizedFrailty grid(spec, {&hazard}, so.last());
  const std::size_t n = ages.size();
  auto g = [&](double, double log_u, std::span<double> out) {
    std::size_t pos = 0;
    grid.accumulate(log_u, so.last(), [&](std::size_t j, std::span<const double> cum) {
      while (pos < n && so.steps[so.order[pos]] == j) {
        out[so.order[pos]] = grid.conditional_survival(cum[0]);
        ++pos;
      }
    });
  };
  GenGammaQuadrature quad(spec.base);
  auto res = quad.expect(g, n, opts);
  for (auto& s : res.value) s = std::clamp(s, 0.0, 1.0);
  return res.value;
}

inline double survivor_one_component(const FrailtySpec& spec, const HazardSpec& hazard, double t) {
  if (spec.second_component)
    throw DomainError("survivor_one_component: spec has a second frailty component");
  const double ages[] = {t};
  return survivor_curve(spec, hazard, ages).front();
}

inline double survivor_two_component(const FrailtySpec& spec, const HazardSpec& hazard, double t) {
  if (!spec.second_component)
    throw DomainError("survivor_two_component: spec has no second component k2");
  const double ages[] = {t};
  return survivor_curve(spec, hazard, ages).front();
}

struct BivariateSurvival {
  double s00 = 1.0;
  double s01 = 0.0;
  double s10 = 0.0;
  double s11 = 0.0;
};

// Four-cell probabilities at each age, plus the marginal survivors they were
// assembled from. Cell 01 is "no event 1, event 2"; cell 10 the reverse.
struct BivariateTable {
  std::vector<double> ages;
  std::vector<BivariateSurvival> cells;
  std::vector<double> marginal1;  // P(no event 1 by t)
  std::vector<double> marginal2;  // P(no event 2 by t)
  std::size_t clipped = 0;        // cells raised from tiny negatives to 0
  Partition partition;            // quadrature partition actually used
};

// Negatives produced by subtraction within this margin are set to zero.
inline constexpr double kClipMargin = 1e-8;

inline BivariateTable bivariate_table(const FrailtySpec& spec, const HazardSpec& hazard1,
                                      const HazardSpec& hazard2, std::span<const double> ages,
                                      const QuadratureOptions& opts = default_survival_quadrature(),
                                      const Partition* fixed_partition = nullptr) {
  const detail::StepOrder so(detail::grid_steps(hazard1, ages));
  (void)detail::grid_steps(hazard2, ages);
  DiscretizedFrailty grid(spec, {&hazard1, &hazard2}, so.last());
  const std::size_t n = ages.size();
  auto g = [&](double, double log_u, std::span<double> out) {
    std::size_t pos = 0;
    grid.accumulate(log_u, so.last(), [&](std::size_t j, std::span<const double> cum) {
      while (pos < n && so.steps[so.order[pos]] == j) {
        const std::size_t a = so.order[pos];
        out[3 * a] = grid.conditional_survival(cum[0]);
        out[3 * a + 1] = grid.conditional_survival(cum[1]);
        out[3 * a + 2] = grid.conditional_survival(cum[0] + cum[1]);
        ++pos;
      }
    });
  };
  GenGammaQuadrature quad(spec.base);
  const auto res = fixed_partition ? quad.expect_on(g, 3 * n, *fixed_partition)
                                   : quad.expect(g, 3 * n, opts);

  BivariateTable table;
  table.ages.assign(ages.begin(), ages.end());
  table.partition = res.partition;
  table.cells.resize(n);
  table.marginal1.resize(n);
  table.marginal2.resize(n);
  auto clip = [&](double v, double t, const char* cell) {
    if (v >= 0.0) return std::min(v, 1.0);
    if (v >= -kClipMargin) {
      ++table.clipped;
      return 0.0;
    }
    throw NumericError("bivariate_probs: S_" + std::string(cell) + "(" + std::to_string(t) +
                           ") = " + std::to_string(v) + " is negative beyond rounding",
                       -v);
  };
  for (std::size_t a = 0; a < n; ++a) {
    const double m1 = std::clamp(res.value[3 * a], 0.0, 1.0);
    const double m2 = std::clamp(res.value[3 * a + 1], 0.0, 1.0);
    const double s00 = std::clamp(res.value[3 * a + 2], 0.0, 1.0);
    table.marginal1[a] = m1;
    table.marginal2[a] = m2;
    BivariateSurvival& c = table.cells[a];
    c.s00 = s00;
    c.s01 = clip(m1 - s00, ages[a], "01");
    c.s10 = clip(m2 - s00, ages[a], "10");
    c.s11 = clip(1.0 - c.s00 - c.s01 - c.s10, ages[a], "11");
  }
  return table;
}

inline BivariateSurvival bivariate_probs(const FrailtySpec& spec, const HazardSpec& hazard1,
                                         const HazardSpec& hazard2, double t) {
  const double ages[] = {t};
  return bivariate_table(spec, hazard1, hazard2, ages).cells.front();
}

}  // namespace tvf
