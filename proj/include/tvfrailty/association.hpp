#pragma once

// Age-specific association measure phi: the Clayton copula parameter that
// links the marginal survivors s1, s2 to the joint survivor s00,
//   s00 = (s1^{-phi} + s2^{-phi} - 1)^{-1/phi},   phi -> 0 giving s1 s2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tvfrailty/errors.hpp"
#include "tvfrailty/likelihood.hpp"
#include "tvfrailty/model.hpp"
#include "tvfrailty/survival.hpp"

namespace tvf {

namespace detail {

// Below this |phi| the series in phi replaces the closed form.
inline constexpr double kPhiSeriesCutoff = 1e-4;

}  // namespace detail

// log s00 under the Clayton copula, for phi >= -1. Returns -inf when the
// copula puts no mass on joint survival.
inline double clayton_log_joint(double s1, double s2, double phi) {
  if (!(s1 > 0.0 && s1 <= 1.0 && s2 > 0.0 && s2 <= 1.0))
    throw DomainError("clayton: marginal survivors must lie in (0, 1]");
  if (!(phi >= -1.0)) throw DomainError("clayton: phi must be >= -1");
  const double a = std::log(s1), b = std::log(s2);
  if (std::fabs(phi) < detail::kPhiSeriesCutoff) {
    const double p1 = a + b, p2 = a * a + b * b, p3 = a * a * a + b * b * b;
    return p1 + phi * a * b + phi * phi * (p3 / 6.0 - p1 * p2 / 2.0 + p1 * p1 * p1 / 3.0);
  }
  const double x = -phi * a, y = -phi * b;  // s1^{-phi} = e^x
  double log_sum;
  if (phi > 0.0 && std::max(x, y) > 1.0) {
    const double m = std::max(x, y), n = std::min(x, y);
    log_sum = m + std::log1p(std::exp(n - m) - std::exp(-m));
  } else {
    const double inner = std::expm1(x) + std::expm1(y);
    if (!(inner > -1.0)) return -std::numeric_limits<double>::infinity();
    log_sum = std::log1p(inner);
  }
  return -log_sum / phi;
}

inline double clayton_joint(double s1, double s2, double phi) {
  return std::exp(clayton_log_joint(s1, s2, phi));
}

// phi with clayton_joint(s1, s2, phi) = s00. Returns +inf at the upper
// Frechet bound min(s1, s2) and -inf at the lower bound max(0, s1 + s2 - 1).
inline double phi_from_probs(double s1, double s2, double s00) {
  if (!(s1 > 0.0 && s1 < 1.0 && s2 > 0.0 && s2 < 1.0))
    throw DomainError("phi_from_probs: marginals must lie strictly in (0, 1)");
  const double lower = std::max(0.0, s1 + s2 - 1.0), upper = std::min(s1, s2);
  if (!(s00 >= lower && s00 <= upper))
    throw DomainError("phi_from_probs: s00 = " + std::to_string(s00) + " lies outside the Frechet bounds [" +
                      std::to_string(lower) + ", " + std::to_string(upper) + "]");
  if (s00 == upper) return std::numeric_limits<double>::infinity();
  if (s00 == lower) return -std::numeric_limits<double>::infinity();

  const double target = std::log(s00);
  auto f = [&](double phi) { return clayton_log_joint(s1, s2, phi) - target; };
  // f increases in phi; bracket on [-1, hi]
  double lo = -1.0, hi = 1.0;
  if (f(lo) >= 0.0) return -1.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  // Illinois false position with a bisection safeguard
  double flo = f(lo), fhi = f(hi);
  int side = 0;
  for (int it = 0; it < 300; ++it) {
    double mid = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(mid > lo && mid < hi) || it % 8 == 7) mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (fm < 0.0) {
      lo = mid;
      flo = fm;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = mid;
      fhi = fm;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

struct PhiPoint {
  double age = 0.0;
  double phi = 0.0;
  double weight = 1.0;
};

struct PhiExclusion {
  double age = 0.0;
  std::string reason;
};

struct PhiSeries {
  std::vector<PhiPoint> points;
  std::vector<PhiExclusion> excluded;
};

namespace detail {

// Var(phi-hat) by the delta method from multinomial sampling of the paired
// table (p00, p01, p10, p11) with total n.
inline double phi_variance(double s1, double s2, double s00, double phi, double n) {
  auto log_c = [&](double x1, double x2, double p) { return clayton_log_joint(x1, x2, p); };
  // implicit function: log C(s1, s2; phi) = log s00
  const double hp = 1e-6 * std::max(1.0, std::fabs(phi));
  // one-sided next to phi = -1
  const double pl = std::max(-1.0, phi - hp), pu = pl + 2.0 * hp;
  const double dphi = (log_c(s1, s2, pu) - log_c(s1, s2, pl)) / (pu - pl);
  const double h1 = 1e-7 * std::min(s1, 1.0 - s1), h2 = 1e-7 * std::min(s2, 1.0 - s2);
  const double d1 = (log_c(s1 + h1, s2, phi) - log_c(s1 - h1, s2, phi)) / (2.0 * h1);
  const double d2 = (log_c(s1, s2 + h2, phi) - log_c(s1, s2 - h2, phi)) / (2.0 * h2);
  // d phi / d(s1, s2, s00)
  const double g1 = -d1 / dphi, g2 = -d2 / dphi, g00 = (1.0 / s00) / dphi;
  // (s1, s2, s00) = (p00 + p01, p00 + p10, p00): gradient over the cells
  const double p[4] = {s00, s1 - s00, s2 - s00, 1.0 - s1 - s2 + s00};
  const double g[4] = {g1 + g2 + g00, g1, g2, 0.0};
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < 4; ++i) {
    mean += g[i] * p[i];
    second += g[i] * g[i] * p[i];
  }
  return (second - mean * mean) / n;
}

}  // namespace detail

// Empirical phi at each age from the fully observed pairs.
inline PhiSeries empirical_phi(const CurrentStatusDataset& data) {
  PhiSeries out;
  for (const auto& r : data.pooled().rows) {
    const double n = r.paired_total();
    if (!(n > 0.0)) {
      out.excluded.push_back({r.age, "no paired observations"});
      continue;
    }
    const double s1 = (r.n[0] + r.n[1]) / n, s2 = (r.n[0] + r.n[2]) / n, s00 = r.n[0] / n;
    if (s1 <= 0.0 || s1 >= 1.0 || s2 <= 0.0 || s2 >= 1.0) {
      out.excluded.push_back({r.age, "degenerate marginal"});
      continue;
    }
    if (s00 <= std::max(0.0, s1 + s2 - 1.0) || s00 >= std::min(s1, s2)) {
      out.excluded.push_back({r.age, "joint proportion at a Frechet bound"});
      continue;
    }
    const double phi = phi_from_probs(s1, s2, s00);
    double var = std::numeric_limits<double>::quiet_NaN();
    try {
      var = detail::phi_variance(s1, s2, s00, phi, n);
    } catch (const DomainError&) {
    }
    if (!(var > 0.0) || !std::isfinite(var) || !std::isfinite(phi)) {
      out.excluded.push_back({r.age, "variance not available"});
      continue;
    }
    out.points.push_back({r.age, phi, 1.0 / var});
  }
  return out;
}

// phi implied by a fitted model at each age; weight 1.
inline PhiSeries fitted_phi(const ModelConfig& config, std::span<const double> ages) {
  const auto m = config.instantiate();
  const auto table = bivariate_table(m.frailty, m.hazard1, m.hazard2, ages);
  PhiSeries out;
  for (std::size_t a = 0; a < ages.size(); ++a) {
    const double s1 = table.marginal1[a], s2 = table.marginal2[a], s00 = table.cells[a].s00;
    // marginals within quadrature error of 0 or 1 carry no information on phi
    constexpr double tiny = 1e-12;
    if (s1 <= tiny || s1 >= 1.0 - tiny || s2 <= tiny || s2 >= 1.0 - tiny) {
      out.excluded.push_back({ages[a], "degenerate marginal"});
      continue;
    }
    const double lower = std::max(0.0, s1 + s2 - 1.0), upper = std::min(s1, s2);
    const double phi = phi_from_probs(s1, s2, std::clamp(s00, lower, upper));
    if (!std::isfinite(phi)) {
      out.excluded.push_back({ages[a], "joint probability at a Frechet bound"});
      continue;
    }
    out.points.push_back({ages[a], phi, 1.0});
  }
  return out;
}

inline PhiSeries fitted_phi(const ModelConfig& config, std::span<const double> params,
                            std::span<const double> ages) {
  return fitted_phi(config.with(params), ages);
}

}  // namespace tvf
