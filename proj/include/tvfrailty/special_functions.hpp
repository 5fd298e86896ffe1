#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "tvfrailty/errors.hpp"

namespace tvf {

// log Γ(x) for x > 0.
//
// Lanczos (g = 7, 9 terms) below 15, Stirling series above. Relative error is
// about 2e-15 (absolute error below 3e-14 on (0, 15)). Unlike
// std::lgamma this never touches the global `signgam`, so it is safe to call
// from concurrent replicates.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: argument must be positive");
  if (std::isinf(x)) return x;
  constexpr double half_log_two_pi = 0.91893853320467274178;
  if (x < 0.5) {
    // reflection keeps the Lanczos sum in its accurate range
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
  }
  if (x >= 15.0) {
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
    return (x - 0.5) * std::log(x) - x + half_log_two_pi + series;
  }
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  const double z = x - 1.0;
  double sum = c[0];
  for (int i = 1; i < 9; ++i) sum += c[i] / (z + i);
  const double t = z + 7.5;
  return half_log_two_pi + (z + 0.5) * std::log(t) - t + std::log(sum);
}

// log Gamma(x + a) - log Gamma(x) without the cancellation that the plain
// difference suffers when x is large.
inline double log_gamma_ratio(double x, double a) {
  if (!(x > 0.0) || !(x + a > 0.0)) throw DomainError("log_gamma_ratio: arguments must be positive");
  if (x < 15.0 || x + a < 15.0) return log_gamma(x + a) - log_gamma(x);
  auto tail = [](double z) {
    const double inv = 1.0 / z;
    const double inv2 = inv * inv;
    return inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))));
  };
  return (x - 0.5) * std::log1p(a / x) + a * std::log(x + a) - a + tail(x + a) - tail(x);
}

inline double gamma_fn(double x) { return std::exp(log_gamma(x)); }

// ψ(x), the logarithmic derivative of Γ. Recurrence up to x >= 8, then the
// asymptotic Bernoulli series; absolute error below 1e-13.
inline double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
  double acc = 0.0;
  while (x < 8.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return acc + std::log(x) - 0.5 * inv - series;
}

namespace detail {

inline double gamma_p_series(double a, double x, double log_prefix) {
  double term = 1.0 / a;
  double sum = term;
  const int max_iter = 1000 + static_cast<int>(10.0 * std::sqrt(a));
  for (int n = 1; n < max_iter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) return sum * std::exp(log_prefix);
  }
  throw NumericError("incomplete gamma series did not converge", std::fabs(term / sum));
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
inline double gamma_q_fraction(double a, double x, double log_prefix) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  const int max_iter = 1000 + static_cast<int>(10.0 * std::sqrt(a));
  for (int i = 1; i < max_iter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) return std::exp(log_prefix) * h;
  }
  throw NumericError("incomplete gamma continued fraction did not converge");
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw DomainError("gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_prefix = a * std::log(x) - x - log_gamma(a);
  if (x < a + 1.0) return detail::gamma_p_series(a, x, log_prefix);
  return 1.0 - detail::gamma_q_fraction(a, x, log_prefix);
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw DomainError("gamma_q: need a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double log_prefix = a * std::log(x) - x - log_gamma(a);
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x, log_prefix);
  return detail::gamma_q_fraction(a, x, log_prefix);
}

// Standard normal quantile: Acklam's rational approximation polished by one
// Halley step against erfc, giving full double precision on (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile: p must lie in [0, 1]");
  }
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// Quantile of the chi-square distribution with one degree of freedom.
inline double chi_square1_quantile(double level) {
  if (level == 0.0) return 0.0;
  const double z = normal_quantile(0.5 * (1.0 + level));
  return z * z;
}

}  // namespace tvf
