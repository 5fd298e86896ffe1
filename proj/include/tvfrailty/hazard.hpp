#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tvfrailty/errors.hpp"

namespace tvf {

// Baseline hazard lambda_0(t) on a grid of step delta.
//
// Piecewise constant: rates[0] on (0, c_1], rates[i] on (c_i, c_{i+1}], and
// rates.back() beyond the last cutpoint. Log-linear: exp(a + b t).
struct HazardSpec {
  enum class Kind { piecewise_constant, log_linear };

  Kind kind = Kind::piecewise_constant;
  std::vector<double> cutpoints;
  std::vector<double> rates{0.05};
  double a = 0.0;
  double b = 0.0;
  double delta = 1.0;

  static HazardSpec constant(double rate, double delta = 1.0) {
    HazardSpec h;
    h.rates = {rate};
    h.delta = delta;
    h.validate();
    return h;
  }
  static HazardSpec piecewise(std::vector<double> cutpoints, std::vector<double> rates,
                              double delta = 1.0) {
    HazardSpec h;
    h.cutpoints = std::move(cutpoints);
    h.rates = std::move(rates);
    h.delta = delta;
    h.validate();
    return h;
  }
  static HazardSpec log_linear(double a, double b, double delta = 1.0) {
    HazardSpec h;
    h.kind = Kind::log_linear;
    h.rates.clear();
    h.a = a;
    h.b = b;
    h.delta = delta;
    h.validate();
    return h;
  }

  void validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("hazard grid step must be positive");
    if (kind == Kind::log_linear) {
      if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("log-linear hazard needs finite a, b");
      return;
    }
    if (rates.size() != cutpoints.size() + 1)
      throw DomainError("piecewise hazard needs one more rate than cutpoints");
    for (std::size_t i = 0; i < cutpoints.size(); ++i) {
      if (!(cutpoints[i] > 0.0) || !std::isfinite(cutpoints[i]))
        throw DomainError("hazard cutpoints must be positive");
      if (i > 0 && !(cutpoints[i] > cutpoints[i - 1]))
        throw DomainError("hazard cutpoints must be strictly ascending");
    }
    for (double r : rates)
      if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("hazard rates must be finite and >= 0");
  }

  double rate(double t) const {
    if (kind == Kind::log_linear) return std::exp(a + b * t);
    // first piece whose right end is >= t; small slack keeps grid points inside
    const double slack = 1e-9 * delta;
    const auto it = std::lower_bound(cutpoints.begin(), cutpoints.end(), t - slack);
    return rates[static_cast<std::size_t>(it - cutpoints.begin())];
  }

  // Number of grid steps j with t = j delta; throws when t is off the grid.
  std::size_t grid_index(double t) const {
    if (t < 0.0 || !std::isfinite(t)) throw DomainError("time must be finite and nonnegative");
    const double j = std::round(t / delta);
    if (std::fabs(j * delta - t) > 1e-9 * std::max(1.0, t))
      throw DomainError("time " + std::to_string(t) + " is not a multiple of the grid step " +
                        std::to_string(delta));
    return static_cast<std::size_t>(j);
  }
};

}  // namespace tvf
