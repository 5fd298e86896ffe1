#pragma once

// Time-varying frailty U(t) = U^{h(t)} / E{U^{h(t)}}, optionally multiplied by
// an independent unit-mean gamma component V.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "tvfrailty/distributions.hpp"
#include "tvfrailty/errors.hpp"
#include "tvfrailty/special_functions.hpp"

namespace tvf {

// Deterministic modulation h(t) with h(0) = 1 and h(t) > 0.
struct ModulationFn {
  enum class Kind { constant_one, exp_quadratic, exp_transition };

  Kind kind = Kind::constant_one;
  double rho = 0.0;
  // exp_transition only: h(t) -> limit as t -> infinity.
  double limit = 1.0;
  // Restrict to nonincreasing h; the outer quadrature can struggle when h grows.
  bool constraint_decreasing = true;

  static ModulationFn constant_one() { return {}; }
  static ModulationFn exp_quadratic(double rho, bool allow_increasing = false) {
    ModulationFn m{Kind::exp_quadratic, rho, 1.0, !allow_increasing};
    m.validate();
    return m;
  }
  static ModulationFn exp_transition(double rho, double limit, bool allow_increasing = false) {
    ModulationFn m{Kind::exp_transition, rho, limit, !allow_increasing};
    m.validate();
    return m;
  }

  void validate() const {
    if (!std::isfinite(rho) || !std::isfinite(limit))
      throw DomainError("modulation parameters must be finite");
    switch (kind) {
      case Kind::constant_one:
        return;
      case Kind::exp_quadratic:
        if (constraint_decreasing && rho < 0.0)
          throw DomainError("rho must be >= 0 for a nonincreasing h(t) (got " +
                            std::to_string(rho) + "); pass allow_increasing to override");
        return;
      case Kind::exp_transition:
        if (!(rho > 0.0)) throw DomainError("exp_transition needs rho > 0");
        if (!(limit > 0.0)) throw DomainError("exp_transition needs a positive limit");
        if (constraint_decreasing && limit > 1.0)
          throw DomainError("exp_transition with limit > 1 makes h(t) increasing");
        return;
    }
  }

  bool is_constant() const {
    return kind == Kind::constant_one || (kind == Kind::exp_quadratic && rho == 0.0) ||
           (kind == Kind::exp_transition && limit == 1.0);
  }

  double operator()(double t) const {
    switch (kind) {
      case Kind::constant_one:
        return 1.0;
      case Kind::exp_quadratic:
        // floor keeps h > 0 where exp underflows
        return std::max(std::exp(-rho * t * t), std::numeric_limits<double>::min());
      case Kind::exp_transition: {
        const double e = std::exp(-rho * t);
        return e + (1.0 - e) * limit;
      }
    }
    return 1.0;
  }

  double derivative(double t) const {
    switch (kind) {
      case Kind::constant_one:
        return 0.0;
      case Kind::exp_quadratic:
        return -2.0 * rho * t * std::exp(-rho * t * t);
      case Kind::exp_transition:
        return rho * std::exp(-rho * t) * (limit - 1.0);
    }
    return 0.0;
  }
};

struct FrailtySpec {
  GenGammaParams base;
  ModulationFn modulation;
  // Shape (= inverse variance) of the unit-mean gamma factor V, when present.
  std::optional<double> second_component;

  // Unit-mean base, which is the normalisation used throughout fitting.
  static FrailtySpec unit_mean(double k, double beta, ModulationFn h = ModulationFn::constant_one(),
                               std::optional<double> k2 = std::nullopt) {
    FrailtySpec s{GenGammaParams::unit_mean(k, beta), h, k2};
    s.validate();
    return s;
  }

  void validate() const {
    base.validate();
    modulation.validate();
    if (second_component && !(*second_component > 0.0 && std::isfinite(*second_component)))
      throw DomainError("second component shape k2 must be positive and finite");
  }
};

// Law of U^h when U ~ GenGamma(theta, k, beta): GenGamma(theta^h, k, beta/h).
inline GenGammaParams transform_params(const GenGammaParams& p, double h) {
  p.validate();
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("transform_params: h must be positive");
  return {std::pow(p.theta, h), p.k, p.beta / h};
}

// log mu(t) = log E{U^{h(t)}}.
inline double log_mu_t(const FrailtySpec& spec, double t) {
  if (t < 0.0) throw DomainError("mu_t: t must be nonnegative");
  return gengamma_log_moment(spec.base, spec.modulation(t));
}

inline double mu_t(const FrailtySpec& spec, double t) { return std::exp(log_mu_t(spec, t)); }

namespace detail {

// log{1 + CV^2} of U^h, i.e. log Gamma(k+2h/b) + log Gamma(k) - 2 log Gamma(k+h/b).
inline double log_one_plus_cv2(const GenGammaParams& p, double h) {
  const double r = h / p.beta;
  return log_gamma_ratio(p.k, 2.0 * r) - 2.0 * log_gamma_ratio(p.k, r);
}

}  // namespace detail

// Squared coefficient of variation of U(t); with a second component this is
// the CV^2 of U^{h(t)} V. Invariant to normalising constants.
inline double cv_squared(const FrailtySpec& spec, double t) {
  if (t < 0.0) throw DomainError("cv_squared: t must be nonnegative");
  spec.base.validate();
  double log1p_cv = detail::log_one_plus_cv2(spec.base, spec.modulation(t));
  if (spec.second_component) log1p_cv += std::log1p(1.0 / *spec.second_component);
  return std::max(0.0, std::expm1(log1p_cv));
}

// d/dt CV^2 = (2/beta) h'(t) (1 + CV^2) {psi(k + 2/beta_t) - psi(k + 1/beta_t)}.
inline double cv_squared_derivative(const FrailtySpec& spec, double t) {
  if (t < 0.0) throw DomainError("cv_squared_derivative: t must be nonnegative");
  const auto& p = spec.base;
  p.validate();
  const double h = spec.modulation(t);
  const double r = h / p.beta;
  const double one_plus = std::exp(detail::log_one_plus_cv2(p, h));
  double d = (2.0 / p.beta) * spec.modulation.derivative(t) * one_plus *
             (digamma(p.k + 2.0 * r) - digamma(p.k + r));
  if (spec.second_component) d *= 1.0 + 1.0 / *spec.second_component;
  return d;
}

}  // namespace tvf
