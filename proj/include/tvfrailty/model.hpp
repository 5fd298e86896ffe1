#pragma once

// Model configuration: which frailty family, modulation and hazards are in
// play, and the named parameters with their links to the unconstrained
// packed vector used by the optimizer.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tvfrailty/errors.hpp"
#include "tvfrailty/frailty.hpp"
#include "tvfrailty/hazard.hpp"

namespace tvf {

enum class Link { log, identity, logit };

struct Parameter {
  std::string name;
  double value = 1.0;
  Link link = Link::log;
  bool free = true;
  // Range of the logit link.
  double lower = 0.0;
  double upper = 1.0;

  double to_eta(double v) const {
    switch (link) {
      case Link::log:
        if (!(v > 0.0)) throw DomainError("parameter " + name + " = " + std::to_string(v) + " must be positive");
        return std::log(v);
      case Link::identity:
        return v;
      case Link::logit: {
        if (!(v > lower && v < upper))
          throw DomainError("parameter " + name + " = " + std::to_string(v) + " must lie in (" +
                            std::to_string(lower) + ", " + std::to_string(upper) + ")");
        const double p = (v - lower) / (upper - lower);
        return std::log(p) - std::log1p(-p);
      }
    }
    return v;
  }

  double from_eta(double eta) const {
    switch (link) {
      case Link::log:
        return std::exp(eta);
      case Link::identity:
        return eta;
      case Link::logit:
        return lower + (upper - lower) / (1.0 + std::exp(-eta));
    }
    return eta;
  }

  // d value / d eta.
  double jacobian(double eta) const {
    switch (link) {
      case Link::log:
        return std::exp(eta);
      case Link::identity:
        return 1.0;
      case Link::logit: {
        const double p = 1.0 / (1.0 + std::exp(-eta));
        return (upper - lower) * p * (1.0 - p);
      }
    }
    return 1.0;
  }
};

inline const char* link_name(Link l) {
  switch (l) {
    case Link::log:
      return "log";
    case Link::identity:
      return "identity";
    case Link::logit:
      return "logit";
  }
  return "log";
}

inline Link parse_link(const std::string& s) {
  if (s == "log") return Link::log;
  if (s == "identity") return Link::identity;
  if (s == "logit") return Link::logit;
  throw DomainError("unknown link '" + s + "'");
}

// A concrete model: frailty and the two baseline hazards.
struct ModelInstance {
  FrailtySpec frailty;
  HazardSpec hazard1;
  HazardSpec hazard2;
};

struct ModelConfig {
  enum class Family { gamma, gengamma };
  // k_beta: parameters (k, beta); alpha_beta: (alpha = k beta, beta).
  enum class Packing { k_beta, alpha_beta };

  std::string name = "model";
  Family family = Family::gamma;
  Packing packing = Packing::k_beta;
  ModulationFn::Kind modulation = ModulationFn::Kind::constant_one;
  bool allow_increasing = false;
  // exp_transition only: use the limit h(inf) = beta, so beta/h(t) -> 1 and
  // the frailty drifts toward a gamma law.
  bool limit_is_beta = false;
  bool two_component = false;
  // Templates: kind, cutpoints and delta. Rates and log-linear coefficients
  // are taken from the parameters.
  HazardSpec hazard1;
  HazardSpec hazard2;
  std::vector<Parameter> parameters;

  // Canonical parameter list for the structure above, with default values
  // taken from the hazard templates.
  static ModelConfig build(Family family, ModulationFn::Kind modulation, HazardSpec h1, HazardSpec h2,
                           bool two_component = false, Packing packing = Packing::k_beta,
                           bool allow_increasing = false) {
    ModelConfig c;
    c.family = family;
    c.packing = family == Family::gamma ? Packing::k_beta : packing;
    c.modulation = modulation;
    c.allow_increasing = allow_increasing;
    c.two_component = two_component;
    c.hazard1 = std::move(h1);
    c.hazard2 = std::move(h2);
    c.rebuild_parameters();
    return c;
  }

  static ModelConfig gamma_with_trend(HazardSpec h1, HazardSpec h2) {
    auto c = build(Family::gamma, ModulationFn::Kind::exp_quadratic, std::move(h1), std::move(h2));
    c.name = "gamma_with_trend";
    return c;
  }
  static ModelConfig gamma_no_trend(HazardSpec h1, HazardSpec h2) {
    auto c = build(Family::gamma, ModulationFn::Kind::constant_one, std::move(h1), std::move(h2));
    c.name = "gamma_no_trend";
    return c;
  }
  static ModelConfig gengamma_no_trend(HazardSpec h1, HazardSpec h2, Packing packing = Packing::k_beta) {
    auto c = build(Family::gengamma, ModulationFn::Kind::constant_one, std::move(h1), std::move(h2), false,
                   packing);
    c.name = "gengamma_no_trend";
    return c;
  }
  static ModelConfig gengamma_with_trend(HazardSpec h1, HazardSpec h2) {
    auto c = build(Family::gengamma, ModulationFn::Kind::exp_quadratic, std::move(h1), std::move(h2));
    c.name = "gengamma_with_trend";
    return c;
  }
  // U^{h(t)} V with gamma U and V.
  static ModelConfig two_component_gamma(HazardSpec h1, HazardSpec h2) {
    auto c = build(Family::gamma, ModulationFn::Kind::exp_quadratic, std::move(h1), std::move(h2), true);
    c.name = "two_component_gamma";
    return c;
  }

  static std::vector<std::string> hazard_parameter_names(const HazardSpec& h, int which) {
    const std::string w = std::to_string(which);
    if (h.kind == HazardSpec::Kind::log_linear) return {"a" + w, "b" + w};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < h.rates.size(); ++i) out.push_back("lambda" + w + "_" + std::to_string(i));
    return out;
  }

  void rebuild_parameters() {
    std::vector<Parameter> old = std::move(parameters);
    parameters.clear();
    auto add = [&](Parameter p) {
      // keep user settings for parameters that survive the rebuild
      // (the link follows the structure)
      for (const auto& o : old)
        if (o.name == p.name) {
          p.value = o.value;
          p.free = o.free;
          p.lower = o.lower;
          p.upper = o.upper;
        }
      parameters.push_back(std::move(p));
    };
    const bool alpha = family == Family::gengamma && packing == Packing::alpha_beta;
    add({alpha ? "alpha" : "k", 1.0, Link::log});
    if (family == Family::gengamma) add({"beta", 1.0, Link::log});
    if (modulation == ModulationFn::Kind::exp_quadratic)
      add({"rho", 0.001, allow_increasing ? Link::identity : Link::log});
    if (modulation == ModulationFn::Kind::exp_transition) {
      add({"rho", 0.1, Link::log});
      if (!limit_is_beta) {
        Parameter lim{"h_limit", 0.5, allow_increasing ? Link::log : Link::logit};
        add(lim);
      }
    }
    if (two_component) add({"k2", 5.0, Link::log});
    for (int m = 1; m <= 2; ++m) {
      const HazardSpec& h = m == 1 ? hazard1 : hazard2;
      const auto names = hazard_parameter_names(h, m);
      if (h.kind == HazardSpec::Kind::log_linear) {
        add({names[0], h.a, Link::identity});
        add({names[1], h.b, Link::identity});
      } else {
        for (std::size_t i = 0; i < names.size(); ++i) add({names[i], h.rates[i], Link::log});
      }
    }
  }

  const Parameter* find(const std::string& n) const {
    for (const auto& p : parameters)
      if (p.name == n) return &p;
    return nullptr;
  }
  Parameter& param(const std::string& n) {
    for (auto& p : parameters)
      if (p.name == n) return p;
    throw DomainError("model has no parameter '" + n + "'");
  }
  const Parameter& param(const std::string& n) const { return const_cast<ModelConfig*>(this)->param(n); }
  bool has(const std::string& n) const { return find(n) != nullptr; }
  double value(const std::string& n) const { return param(n).value; }
  void set(const std::string& n, double v) { param(n).value = v; }
  void fix(const std::string& n, double v) {
    auto& p = param(n);
    p.value = v;
    p.free = false;
  }

  std::size_t n_free() const {
    std::size_t c = 0;
    for (const auto& p : parameters) c += p.free ? 1 : 0;
    return c;
  }
  std::vector<std::string> free_names() const {
    std::vector<std::string> out;
    for (const auto& p : parameters)
      if (p.free) out.push_back(p.name);
    return out;
  }
  std::vector<std::size_t> free_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < parameters.size(); ++i)
      if (parameters[i].free) out.push_back(i);
    return out;
  }

  // Free parameters on the link scale.
  std::vector<double> pack() const {
    std::vector<double> eta;
    for (const auto& p : parameters)
      if (p.free) eta.push_back(p.to_eta(p.value));
    return eta;
  }
  void unpack(std::span<const double> eta) {
    if (eta.size() != n_free())
      throw DomainError("packed vector has " + std::to_string(eta.size()) + " entries, model has " +
                        std::to_string(n_free()) + " free parameters");
    std::size_t i = 0;
    for (auto& p : parameters)
      if (p.free) p.value = p.from_eta(eta[i++]);
  }
  ModelConfig with(std::span<const double> eta) const {
    ModelConfig c = *this;
    c.unpack(eta);
    return c;
  }

  double k_value() const {
    if (has("alpha")) return value("alpha") / value("beta");
    return value("k");
  }
  double beta_value() const { return family == Family::gengamma ? value("beta") : 1.0; }

  ModulationFn modulation_fn() const {
    switch (modulation) {
      case ModulationFn::Kind::constant_one:
        return ModulationFn::constant_one();
      case ModulationFn::Kind::exp_quadratic:
        return ModulationFn::exp_quadratic(value("rho"), allow_increasing);
      case ModulationFn::Kind::exp_transition:
        return ModulationFn::exp_transition(value("rho"), limit_is_beta ? beta_value() : value("h_limit"),
                                            allow_increasing);
    }
    return ModulationFn::constant_one();
  }

  FrailtySpec frailty() const {
    std::optional<double> k2;
    if (two_component) k2 = value("k2");
    return FrailtySpec::unit_mean(k_value(), beta_value(), modulation_fn(), k2);
  }

  HazardSpec hazard(int which) const {
    HazardSpec h = which == 1 ? hazard1 : hazard2;
    const auto names = hazard_parameter_names(h, which);
    if (h.kind == HazardSpec::Kind::log_linear) {
      h.a = value(names[0]);
      h.b = value(names[1]);
    } else {
      for (std::size_t i = 0; i < names.size(); ++i) h.rates[i] = value(names[i]);
    }
    h.validate();
    return h;
  }

  ModelInstance instantiate() const { return {frailty(), hazard(1), hazard(2)}; }

  void validate() const {
    if (std::fabs(hazard1.delta - hazard2.delta) > 1e-12 * hazard1.delta)
      throw DomainError("both hazards must use the same grid step");
    for (const auto& p : parameters) {
      if (!std::isfinite(p.value)) throw DomainError("parameter " + p.name + " has a non-finite value");
      if (p.free) (void)p.to_eta(p.value);
    }
    (void)instantiate();
  }
};

}  // namespace tvf
