#pragma once

// Maximum-likelihood fitting of a ModelConfig to current status data.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tvfrailty/association.hpp"
#include "tvfrailty/errors.hpp"
#include "tvfrailty/likelihood.hpp"
#include "tvfrailty/model.hpp"
#include "tvfrailty/optimize.hpp"

namespace tvf {

// Negative log-likelihood over the packed vector. anchor() stores the
// quadrature partition adapted at a point; smooth() reuses it.
class NegLoglik {
 public:
  NegLoglik(ModelConfig config, const CurrentStatusDataset& data) : config_(std::move(config)), data_(&data) {}

  double value(std::span<const double> eta) { return evaluate(eta, nullptr); }
  double smooth(std::span<const double> eta) {
    return evaluate(eta, partition_.empty() ? nullptr : &partition_);
  }
  void anchor(std::span<const double> eta) {
    partition_.clear();
    try {
      const auto ev = loglik_evaluate(config_.with(eta).instantiate(), *data_);
      partition_ = ev.table.partition;
    } catch (const std::exception&) {
      // leave unanchored; smooth() falls back to adaptive evaluation
    }
  }
  const ModelConfig& config() const { return config_; }

 private:
  double evaluate(std::span<const double> eta, const Partition* fixed) {
    try {
      const auto ev = loglik_evaluate(config_.with(eta).instantiate(), *data_, fixed);
      if (ev.underflow || !std::isfinite(ev.value)) return std::numeric_limits<double>::infinity();
      return -ev.value;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  ModelConfig config_;
  const CurrentStatusDataset* data_;
  Partition partition_;
};

// ---------------------------------------------------------------------------
// Starting values

namespace detail {

// No-frailty current status fit of one marginal: maximises
// sum neg * (-L(t)) + pos * log(1 - e^{-L(t)}) over the hazard parameters.
inline void fit_marginal_hazard(ModelConfig& config, int which, const CurrentStatusDataset& data) {
  const HazardSpec templ = which == 1 ? config.hazard1 : config.hazard2;
  const auto names = ModelConfig::hazard_parameter_names(templ, which);
  std::vector<double> age, neg, pos;
  for (const auto& r : data.rows) {
    const double ng = which == 1 ? r.n[0] + r.n[1] + r.m0x : r.n[0] + r.n[2] + r.mx0;
    const double ps = which == 1 ? r.n[2] + r.n[3] + r.m1x : r.n[1] + r.n[3] + r.mx1;
    if (ng + ps > 0.0 && r.age > 0.0) {
      age.push_back(r.age);
      neg.push_back(ng);
      pos.push_back(ps);
    }
  }
  if (age.empty()) return;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (config.param(names[i]).free) free.push_back(i);
  if (free.empty()) return;

  auto hazard_at = [&](std::span<const double> x) {
    HazardSpec h = templ;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto& p = config.param(names[i]);
      double v = p.value;
      for (std::size_t f = 0; f < free.size(); ++f)
        if (free[f] == i) v = p.from_eta(x[f]);
      if (h.kind == HazardSpec::Kind::log_linear)
        (i == 0 ? h.a : h.b) = v;
      else
        h.rates[i] = v;
    }
    return h;
  };
  auto nll = [&](std::span<const double> x) {
    const HazardSpec h = hazard_at(x);
    double ll = 0.0, cum = 0.0;
    std::size_t step = 0;
    for (std::size_t a = 0; a < age.size(); ++a) {
      const std::size_t target = h.grid_index(age[a]);
      for (; step < target; ++step) cum += h.delta * h.rate((step + 1) * h.delta);
      ll -= neg[a] * cum;
      if (pos[a] > 0.0) ll += pos[a] * std::log(-std::expm1(-std::max(cum, 1e-300)));
    }
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };
  std::vector<double> x0;
  for (std::size_t i : free) {
    const auto& p = config.param(names[i]);
    double v = p.value;
    if (p.link == Link::log && !(v > 0.0)) v = 0.01;
    x0.push_back(p.to_eta(v));
  }
  PlainObjective obj{nll};
  OptimizerOptions o;
  o.simplex_max_evals = 400 * static_cast<int>(x0.size());
  o.simplex_ftol = 1e-10;
  try {
    const auto res = minimize(obj, x0, o);
    for (std::size_t f = 0; f < free.size(); ++f) {
      auto& p = config.param(names[free[f]]);
      p.value = p.from_eta(res.x[f]);
    }
  } catch (const NumericError&) {
  }
}

}  // namespace detail

// Data-driven starting values for the free parameters: hazards from
// no-frailty fits to each marginal; k (and rho) from a weighted regression
// of log phi-hat on t^2, using log phi ~ -log k - 2 rho t^2 for gamma U^{h(t)}
// with small variance; k2 from phi-hat at the oldest ages.
inline ModelConfig initial_values(ModelConfig config, const CurrentStatusDataset& data) {
  detail::fit_marginal_hazard(config, 1, data);
  detail::fit_marginal_hazard(config, 2, data);

  const auto phi = empirical_phi(data);
  std::vector<PhiPoint> pts;
  for (const auto& p : phi.points)
    if (p.phi > 1e-3 && std::isfinite(p.weight)) pts.push_back(p);

  double k0 = 1.0, rho0 = 0.001, late_phi = 0.0;
  const bool trend = config.has("rho") && config.modulation == ModulationFn::Kind::exp_quadratic;
  if (pts.size() >= 3) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
      const double w = p.weight * p.phi * p.phi;  // Var(log phi) ~ Var(phi) / phi^2
      const double x = p.age * p.age, y = std::log(p.phi);
      sw += w;
      sx += w * x;
      sy += w * y;
      sxx += w * x * x;
      sxy += w * x * y;
    }
    const double det = sw * sxx - sx * sx;
    if (trend && det > 0.0) {
      const double slope = (sw * sxy - sx * sy) / det;
      const double icpt = (sy - slope * sx) / sw;
      k0 = std::exp(-icpt);
      rho0 = -slope / 2.0;
    } else {
      // weighted mean of phi over the middle third of the ages
      const double lo = pts.front().age, hi = pts.back().age;
      double w = 0.0, m = 0.0;
      for (const auto& p : pts)
        if (p.age >= lo + (hi - lo) / 3.0 && p.age <= hi - (hi - lo) / 3.0) {
          w += p.weight;
          m += p.weight * p.phi;
        }
      if (w > 0.0) k0 = w / m;
    }
    double w = 0.0, m = 0.0;
    for (std::size_t i = pts.size() - std::min<std::size_t>(pts.size(), 5); i < pts.size(); ++i) {
      w += pts[i].weight;
      m += pts[i].weight * pts[i].phi;
    }
    if (w > 0.0) late_phi = m / w;
  }
  k0 = std::clamp(k0, 0.02, 50.0);
  rho0 = std::clamp(rho0, 1e-5, 0.5);

  auto set_free = [&](const std::string& n, double v) {
    if (config.has(n) && config.param(n).free) config.set(n, v);
  };
  set_free("k", k0);
  set_free("beta", 1.0);
  set_free("alpha", k0 * config.beta_value());
  if (config.modulation == ModulationFn::Kind::exp_quadratic) set_free("rho", rho0);
  if (config.two_component) set_free("k2", std::clamp(late_phi > 0.0 ? 1.0 / late_phi : 10.0, 0.5, 50.0));
  return config;
}

// ---------------------------------------------------------------------------
// Fit

struct FitOptions {
  OptimizerOptions optim;
  bool data_driven_start = true;
  bool compute_hessian = true;
  double ci_level = 0.95;
  // Parameters to profile; "all" profiles every free parameter.
  std::vector<std::string> profile;
  ProfileOptions profile_options;
};

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  bool lower_open = false;
  bool upper_open = false;
  std::string warning;
};

struct ParameterEstimate {
  std::string name;
  double value = 0.0;
  bool free = true;
  double eta = 0.0;
  // Advisory Hessian-based standard errors (natural and link scale).
  double se = std::numeric_limits<double>::quiet_NaN();
  double se_eta = std::numeric_limits<double>::quiet_NaN();
  std::optional<ConfidenceInterval> profile_ci;
};

struct Convergence {
  bool converged = false;
  bool max_iter = false;
  bool degenerate_hessian = false;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = 0.0;
  std::string message;
};

struct FitResult {
  ModelConfig config;  // with fitted values
  std::vector<ParameterEstimate> estimates;
  double loglik_initial = 0.0;
  double loglik_max = 0.0;
  double aic = 0.0;
  double deviance = 0.0;
  int df = 0;
  std::size_t n_params = 0;
  Convergence convergence;

  const ParameterEstimate& estimate(const std::string& n) const {
    for (const auto& e : estimates)
      if (e.name == n) return e;
    throw DomainError("fit has no parameter '" + n + "'");
  }
  double value(const std::string& n) const { return estimate(n).value; }
};

ConfidenceInterval profile_ci(const FitResult& fit, const CurrentStatusDataset& data, const std::string& param,
                    double level, const FitOptions& opts = {});

inline FitResult fit(const ModelConfig& config_in, const CurrentStatusDataset& data, const FitOptions& opts = {}) {
  data.validate();
  config_in.validate();
  ModelConfig start = opts.data_driven_start ? initial_values(config_in, data) : config_in;
  start.validate();

  NegLoglik obj(start, data);
  const Vector x0 = start.pack();
  FitResult out;
  {
    const auto ev = loglik_evaluate(start.instantiate(), data);
    if (ev.underflow || !std::isfinite(ev.value)) {
      std::string names;
      for (const auto& p : start.parameters) names += p.name + "=" + std::to_string(p.value) + " ";
      throw NumericError("log-likelihood is not finite at the initial point (" + names + "): " + ev.diagnostic);
    }
    out.loglik_initial = ev.value;
  }
  auto res = minimize(obj, x0, opts.optim);
  if (-res.f < out.loglik_initial) {
    // never report a point worse than the start
    res.x = x0;
    res.f = -out.loglik_initial;
    res.converged = false;
    res.message = "optimizer did not improve on the initial point";
  }

  out.config = start.with(res.x);
  out.n_params = start.n_free();
  // report the adaptive value at the optimum
  out.loglik_max = loglik_evaluate(out.config.instantiate(), data).value;
  out.aic = aic(out.loglik_max, out.n_params);
  const auto dev = deviance_from(out.loglik_max, out.n_params, data);
  out.deviance = dev.deviance;
  out.df = dev.df;
  out.convergence.converged = res.converged;
  out.convergence.max_iter = res.max_iter;
  out.convergence.iterations = res.iterations;
  out.convergence.evaluations = res.evaluations;
  out.convergence.gradient_norm = res.gradient_norm;
  out.convergence.message = res.message;

  std::optional<std::vector<Vector>> cov;
  if (opts.compute_hessian && !res.x.empty()) {
    const auto H = numeric_hessian(obj, res.x);
    cov = spd_inverse(H);
    out.convergence.degenerate_hessian = !cov.has_value();
  }
  std::size_t fi = 0;
  for (const auto& p : out.config.parameters) {
    ParameterEstimate e;
    e.name = p.name;
    e.value = p.value;
    e.free = p.free;
    if (p.free) {
      e.eta = res.x[fi];
      if (cov) {
        e.se_eta = std::sqrt((*cov)[fi][fi]);
        e.se = e.se_eta * std::fabs(p.jacobian(e.eta));
      }
      ++fi;
    }
    out.estimates.push_back(e);
  }

  std::vector<std::string> wanted = opts.profile;
  if (wanted.size() == 1 && wanted[0] == "all") wanted = out.config.free_names();
  for (const auto& n : wanted) {
    auto& e = const_cast<ParameterEstimate&>(out.estimate(n));
    e.profile_ci = profile_ci(out, data, n, opts.ci_level, opts);
  }
  return out;
}

// Profile-likelihood interval for one free parameter, on the natural scale.
inline ConfidenceInterval profile_ci(const FitResult& fit, const CurrentStatusDataset& data, const std::string& param,
                           double level, const FitOptions& opts) {
  const auto names = fit.config.free_names();
  const auto it = std::find(names.begin(), names.end(), param);
  if (it == names.end()) throw DomainError("profile_ci: '" + param + "' is not a free parameter");
  const std::size_t index = static_cast<std::size_t>(it - names.begin());
  NegLoglik obj(fit.config, data);
  const Vector x_hat = fit.config.pack();
  const auto& est = fit.estimate(param);
  const auto ends = profile_endpoints(obj, x_hat, -fit.loglik_max, index, level, est.se_eta, opts.optim,
                                      opts.profile_options);
  const Parameter& p = fit.config.param(param);
  ConfidenceInterval ci;
  ci.level = level;
  ci.lower = p.from_eta(ends.lower.x);
  ci.upper = p.from_eta(ends.upper.x);
  ci.lower_open = ends.lower.open;
  ci.upper_open = ends.upper.open;
  ci.warning = ends.warning;
  if (ci.lower_open && p.link == Link::log) ci.lower = 0.0;
  if (ci.lower_open && p.link == Link::identity) ci.lower = -std::numeric_limits<double>::infinity();
  if (ci.upper_open && p.link != Link::logit) ci.upper = std::numeric_limits<double>::infinity();
  if (ci.lower_open && p.link == Link::logit) ci.lower = p.lower;
  if (ci.upper_open && p.link == Link::logit) ci.upper = p.upper;
  return ci;
}

}  // namespace tvf
