#pragma once

// Generalized gamma frailty densities, their moments, and the Egg-family
// normalising integral.
//
// Parameterization: f(u) = beta / (theta^{k beta} Gamma(k)) u^{k beta - 1}
// exp(-(u/theta)^beta), u > 0. beta = 1 is the gamma family, k = 1 the Weibull.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tvfrailty/errors.hpp"
#include "tvfrailty/quadrature.hpp"
#include "tvfrailty/special_functions.hpp"

namespace tvf {

struct GenGammaParams {
  double theta = 1.0;
  double k = 1.0;
  double beta = 1.0;

  void validate() const {
    if (!(theta > 0.0 && k > 0.0 && beta > 0.0) || !std::isfinite(theta) || !std::isfinite(k) ||
        !std::isfinite(beta))
      throw DomainError("generalized gamma parameters must be finite and positive (theta=" +
                        std::to_string(theta) + ", k=" + std::to_string(k) +
                        ", beta=" + std::to_string(beta) + ")");
  }

  static GenGammaParams unit_mean(double k, double beta);
  static GenGammaParams gamma_unit_mean(double k) { return unit_mean(k, 1.0); }

  bool operator==(const GenGammaParams&) const = default;
};

struct EggParams {
  double alpha = 1.0;
  double beta = 1.0;
  double theta = 1.0;
  double lambda = 0.0;

  void validate() const {
    if (!(alpha > 0.0 && beta > 0.0 && theta > 0.0 && lambda >= 0.0) || !std::isfinite(alpha) ||
        !std::isfinite(beta) || !std::isfinite(theta) || !std::isfinite(lambda))
      throw DomainError("Egg parameters need alpha, beta, theta > 0 and lambda >= 0");
  }

  // The generalized gamma sits in the Egg family at lambda = 0, alpha = k beta.
  static EggParams from_gengamma(const GenGammaParams& p) {
    return {p.k * p.beta, p.beta, p.theta, 0.0};
  }
};

inline double gengamma_log_pdf(const GenGammaParams& p, double u) {
  p.validate();
  if (!(u > 0.0) || !std::isfinite(u)) throw DomainError("gengamma_pdf: u must be positive");
  const double kb = p.k * p.beta;
  const double log_ratio = std::log(u) - std::log(p.theta);
  return std::log(p.beta) - std::log(u) + kb * log_ratio - std::exp(p.beta * log_ratio) -
         log_gamma(p.k);
}

inline double gengamma_pdf(const GenGammaParams& p, double u) {
  return std::exp(gengamma_log_pdf(p, u));
}

// P(U <= u) = P(k, (u/theta)^beta).
inline double gengamma_cdf(const GenGammaParams& p, double u) {
  p.validate();
  if (u <= 0.0) return 0.0;
  return gamma_p(p.k, std::pow(u / p.theta, p.beta));
}

inline double gengamma_log_moment(const GenGammaParams& p, double r) {
  p.validate();
  const double shifted = p.k + r / p.beta;
  if (!(shifted > 0.0))
    throw DomainError("gengamma_moment: k + r/beta must be positive (got " +
                      std::to_string(shifted) + ")");
  return r * std::log(p.theta) + log_gamma_ratio(p.k, r / p.beta);
}

// E(U^r) = theta^r Gamma(k + r/beta) / Gamma(k).
inline double gengamma_moment(const GenGammaParams& p, double r) {
  return std::exp(gengamma_log_moment(p, r));
}

// Scale giving E(U) = 1: theta = Gamma(k) / Gamma(k + 1/beta).
inline double unit_mean_theta(double k, double beta) {
  if (!(k > 0.0 && beta > 0.0)) throw DomainError("unit_mean_theta: k and beta must be positive");
  return std::exp(-log_gamma_ratio(k, 1.0 / beta));
}

inline GenGammaParams GenGammaParams::unit_mean(double k, double beta) {
  return {unit_mean_theta(k, beta), k, beta};
}

// log Gamma(k) subtracted from k log k - k, computed without cancellation for
// large k.
inline double detail_log_gamma_offset(double k) {
  if (k < 1e4) return k * std::log(k) - k - log_gamma(k);
  const double inv = 1.0 / k;
  return 0.5 * std::log(k / (2.0 * std::numbers::pi)) - inv / 12.0 + inv * inv * inv / 360.0;
}

// Quadrature over the generalized gamma law of U.
//
// With W = (U/theta)^beta ~ Gamma(k, 1) and W = k e^y, the density of y is
// exp(c(k) - k (expm1(y) - y)), unimodal at y = 0 with a left tail decaying
// like e^{k y}. The real line is folded onto (-1, 1) with scales matched to
// the two tails. The integrand g(u, log_u, out) fills `n` values; the result
// holds E g(U) componentwise.
struct GenGammaQuadrature {
  GenGammaParams params;
  RealLineMap map;
  double log_offset;
  double log_k;

  explicit GenGammaQuadrature(const GenGammaParams& p)
      : params(p), map{0.0, 1.0, 1.0}, log_offset(0.0), log_k(0.0) {
    p.validate();
    const double k = p.k;
    map.left_scale = k < 1.0 ? 1.0 / k : 1.0 / std::sqrt(k);
    map.right_scale = k < 1.0 ? 1.0 : 1.0 / std::sqrt(k);
    log_offset = detail_log_gamma_offset(k);
    log_k = std::log(k);
  }

  // Log density of y and log u at the folded coordinate tau.
  struct Node {
    double weight;  // density times Jacobian
    double log_u;
  };
  Node node(double tau) const {
    const double y = map.point(tau);
    if (!std::isfinite(y)) return {0.0, 0.0};
    const double log_density = log_offset - params.k * (std::expm1(y) - y);
    const double w = std::exp(log_density) * map.jacobian(tau);
    const double log_u = std::log(params.theta) + (log_k + y) / params.beta;
    return {std::isfinite(w) ? w : 0.0, log_u};
  }

  template <class G>
  auto integrand(G& g, std::size_t n) const {
    return [this, &g, n](double tau, std::span<double> out) {
      const Node nd = node(tau);
      if (nd.weight == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
      }
      g(std::exp(nd.log_u), nd.log_u, out);
      for (std::size_t c = 0; c < n; ++c) out[c] *= nd.weight;
    };
  }

  template <class G>
  QuadratureResult expect(G&& g, std::size_t n, const QuadratureOptions& opts = {}) const {
    auto f = integrand(g, n);
    return integrate_adaptive(f, n, RealLineMap::initial_partition(), opts);
  }

  template <class G>
  QuadratureResult expect_on(G&& g, std::size_t n, const Partition& partition) const {
    auto f = integrand(g, n);
    return integrate_fixed(f, n, partition);
  }
};

// E g(U) for scalar g.
template <class G>
double gengamma_expectation(const GenGammaParams& p, G&& g, const QuadratureOptions& opts = {}) {
  GenGammaQuadrature q(p);
  auto vg = [&](double u, double, std::span<double> out) { out[0] = g(u); };
  return q.expect(vg, 1, opts).value[0];
}

// I*(alpha, beta, theta, lambda) = int_0^inf (u/theta)^{alpha-1}
// exp(-lambda u/theta - (u/theta)^beta) du, by adaptive quadrature in
// y = log(u/theta), split at the mode of the integrand.
inline double egg_integral(const EggParams& e, double rel_tol = 1e-8) {
  e.validate();
  // mode solves alpha = lambda e^y + beta e^{beta y}; the right side increases in y
  auto slope = [&](double y) { return e.alpha - e.lambda * std::exp(y) - e.beta * std::exp(e.beta * y); };
  double lo = -1.0, hi = 1.0;
  while (slope(lo) < 0.0) lo *= 2.0;
  while (slope(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * (1.0 + std::fabs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  const double mode = 0.5 * (lo + hi);
  const double curvature = e.lambda * std::exp(mode) + e.beta * e.beta * std::exp(e.beta * mode);
  const double width = 1.0 / std::sqrt(curvature);
  const double log_peak = e.alpha * mode - e.lambda * std::exp(mode) - std::exp(e.beta * mode);

  const RealLineMap map{mode, std::max(width, 1.0 / e.alpha), width};
  auto f = [&](double tau, std::span<double> out) {
    const double y = map.point(tau);
    const double lv =
        e.alpha * y - e.lambda * std::exp(y) - std::exp(e.beta * y) - log_peak;
    const double v = std::exp(lv) * map.jacobian(tau);
    out[0] = std::isfinite(v) ? v : 0.0;
  };
  QuadratureOptions opts;
  opts.rel_tol = rel_tol * 1e-2;
  opts.abs_tol = 0.0;
  const auto res = integrate_adaptive(f, 1, RealLineMap::initial_partition(), opts);
  if (!(res.error[0] <= rel_tol * std::fabs(res.value[0])))
    throw NumericError("egg_integral did not reach tolerance", res.error[0] / res.value[0]);
  return e.theta * res.value[0] * std::exp(log_peak);
}

}  // namespace tvf
