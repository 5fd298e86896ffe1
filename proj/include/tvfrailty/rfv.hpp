#pragma once

// Relative frailty variance: the squared coefficient of variation of the
// frailty among those still event-free.

#include <cmath>
#include <span>
#include <vector>

#include "tvfrailty/distributions.hpp"
#include "tvfrailty/frailty.hpp"
#include "tvfrailty/hazard.hpp"
#include "tvfrailty/survival.hpp"

namespace tvf {

inline double log_egg_integral(const EggParams& e, double rel_tol = 1e-10) {
  return std::log(egg_integral(e, rel_tol));
}

// Scaled RFV of a time-invariant generalized gamma frailty at integrated
// hazard s:
//   I*(kb+2, b, 1, s theta) I*(kb, b, 1, s theta) / I*(kb+1, b, 1, s theta)^2 - 1.
inline double rfv_scaled(const GenGammaParams& p, double s) {
  p.validate();
  if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("rfv_scaled: s must be finite and >= 0");
  const double alpha = p.k * p.beta;
  const double lambda = s * p.theta;
  const double l0 = log_egg_integral({alpha, p.beta, 1.0, lambda});
  const double l1 = log_egg_integral({alpha + 1.0, p.beta, 1.0, lambda});
  const double l2 = log_egg_integral({alpha + 2.0, p.beta, 1.0, lambda});
  return std::max(0.0, std::expm1(l2 + l0 - 2.0 * l1));
}

// Moments of the frailty over event-free survivors at grid time t:
// weights w(u) = P(no event by t | U = u), for U(t) and for U itself.
struct SurvivorMoments {
  double t = 0.0;
  double i0 = 1.0;  // E w
  double i1 = 1.0;  // E U(t) w
  double i2 = 1.0;  // E U(t)^2 w
  double j1 = 1.0;  // E U w
  double j2 = 1.0;  // E U^2 w

  // RFV*(t) = I2 I0 / I1^2 - 1.
  double rfv_star() const { return std::max(0.0, i2 * i0 / (i1 * i1) - 1.0); }
  // Same for the time-invariant U under the same selection.
  double rfv_base() const { return std::max(0.0, j2 * i0 / (j1 * j1) - 1.0); }
  // E(U | T > t).
  double mean_base() const { return j1 / i0; }
};

inline std::vector<SurvivorMoments> survivor_moments(
    const FrailtySpec& spec, const HazardSpec& hazard, std::span<const double> ages,
    const QuadratureOptions& opts = default_survival_quadrature()) {
  const detail::StepOrder so(detail::grid_steps(hazard, ages));
  DiscretizedFrailty grid(spec, {&hazard}, so.last());
  const std::size_t n = ages.size();
  const auto k2 = spec.second_component;
  auto g = [&](double u, double log_u, std::span<double> out) {
    std::size_t pos = 0;
    grid.accumulate(log_u, so.last(), [&](std::size_t j, std::span<const double> cum) {
      while (pos < n && so.steps[so.order[pos]] == j) {
        const std::size_t a = so.order[pos];
        const double x = std::exp(grid.h(j) * log_u - grid.log_mu(j));  // U(t) / E V
        const double I = cum[0];
        double e0, e1, e2;  // E_V[V^r exp(-V I)], r = 0, 1, 2
        if (k2) {
          const double q = *k2 / (*k2 + I);
          e0 = std::exp(*k2 * std::log(q));
          e1 = e0 * q;
          e2 = e1 * q * (*k2 + 1.0) / *k2;
        } else {
          e0 = e1 = e2 = std::exp(-I);
        }
        double* o = &out[5 * a];
        o[0] = e0;
        o[1] = x * e1;
        o[2] = x * x * e2;
        o[3] = u * e0;
        o[4] = u * u * e0;
        ++pos;
      }
    });
  };
  GenGammaQuadrature quad(spec.base);
  const auto res = quad.expect(g, 5 * n, opts);
  std::vector<SurvivorMoments> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    const double* v = &res.value[5 * a];
    out[a] = {ages[a], v[0], v[1], v[2], v[3], v[4]};
  }
  return out;
}

inline std::vector<double> rfv_star_curve(const FrailtySpec& spec, const HazardSpec& hazard,
                                          std::span<const double> ages) {
  std::vector<double> out;
  for (const auto& m : survivor_moments(spec, hazard, ages)) out.push_back(m.rfv_star());
  return out;
}

inline double rfv_star(const FrailtySpec& spec, const HazardSpec& hazard, double t) {
  const double ages[] = {t};
  return survivor_moments(spec, hazard, ages).front().rfv_star();
}

// First-order approximation for small frailty variance, based on
// U^{h} ~ 1 + (U - 1) h:  RFV*(t) ~ RFV0*(t) [h / (h + (1 - h) / mu_c)]^2.
inline double rfv_star_linear_approx(const FrailtySpec& spec, double rfv0, double mu_c, double t) {
  const double h = spec.modulation(t);
  if (!(h > 0.0 && h <= 1.0)) throw DomainError("rfv_star_linear_approx: needs 0 < h(t) <= 1");
  if (!(mu_c > 0.0)) throw DomainError("rfv_star_linear_approx: mu_c must be positive");
  if (!(rfv0 >= 0.0)) throw DomainError("rfv_star_linear_approx: rfv0 must be nonnegative");
  const double r = h / (h + (1.0 - h) / mu_c);
  return rfv0 * r * r;
}

// The approximation with RFV0*(t) and mu_c(t) = E(U | T > t) taken from the
// model's own selection weights.
inline double rfv_star_linear_approx(const FrailtySpec& spec, const HazardSpec& hazard, double t) {
  const double ages[] = {t};
  const auto m = survivor_moments(spec, hazard, ages).front();
  return rfv_star_linear_approx(spec, m.rfv_base(), m.mean_base(), t);
}

}  // namespace tvf
