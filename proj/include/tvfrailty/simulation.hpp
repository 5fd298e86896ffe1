#pragma once

// Simulated paired current status data and the Monte Carlo study driver.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tvfrailty/errors.hpp"
#include "tvfrailty/fitting.hpp"
#include "tvfrailty/likelihood.hpp"
#include "tvfrailty/model.hpp"
#include "tvfrailty/random.hpp"
#include "tvfrailty/survival.hpp"

namespace tvf {

// For each age, n_per_age individuals: draw U (and V), compute the two
// cumulative hazards I_m(t, u), then the two event indicators independently
// with P(no event m) = exp(-v I_m).
inline CurrentStatusDataset simulate_dataset(const ModelConfig& truth, std::span<const double> ages, int n_per_age,
                                             Engine& eng) {
  if (n_per_age < 1) throw DomainError("n_per_age must be >= 1");
  const auto m = truth.instantiate();
  const detail::StepOrder so(detail::grid_steps(m.hazard1, ages));
  (void)detail::grid_steps(m.hazard2, ages);
  DiscretizedFrailty grid(m.frailty, {&m.hazard1, &m.hazard2}, so.last());
  const auto k2 = m.frailty.second_component;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  CurrentStatusDataset data;
  data.rows.resize(ages.size());
  for (std::size_t a = 0; a < ages.size(); ++a) {
    auto& row = data.rows[a];
    row.age = ages[a];
    const std::size_t step = so.steps[a];
    for (int i = 0; i < n_per_age; ++i) {
      const double u = draw_gengamma(m.frailty.base, eng);
      const double v = k2 ? draw_unit_gamma(*k2, eng) : 1.0;
      double I1 = 0.0, I2 = 0.0;
      grid.accumulate(std::log(u), step, [&](std::size_t j, std::span<const double> cum) {
        if (j == step) {
          I1 = cum[0];
          I2 = cum[1];
        }
      });
      const bool e1 = unif(eng) >= std::exp(-v * I1);
      const bool e2 = unif(eng) >= std::exp(-v * I2);
      row.n[2 * (e1 ? 1 : 0) + (e2 ? 1 : 0)] += 1.0;
    }
  }
  return data;
}

inline CurrentStatusDataset simulate_dataset(const ModelConfig& truth, std::span<const double> ages, int n_per_age,
                                             std::uint64_t seed) {
  Engine eng = replicate_engine(seed, 0);
  return simulate_dataset(truth, ages, n_per_age, eng);
}

inline std::vector<double> integer_ages(int first, int last) {
  std::vector<double> a;
  for (int t = first; t <= last; ++t) a.push_back(t);
  return a;
}

// Study scenarios with constant baseline hazards 0.05 on both events.

// Gamma U with variance 1/k and h(t) = exp(-rho t^2).
inline ModelConfig scenario_a(double k, double rho) {
  auto c = ModelConfig::gamma_with_trend(HazardSpec::constant(0.05), HazardSpec::constant(0.05));
  c.name = "a";
  c.set("k", k);
  c.set("rho", rho);
  return c;
}

// Generalized gamma U, no trend, packed as (alpha = k beta, beta).
inline ModelConfig scenario_b(double k, double beta) {
  auto c = ModelConfig::gengamma_no_trend(HazardSpec::constant(0.05), HazardSpec::constant(0.05),
                                          ModelConfig::Packing::alpha_beta);
  c.name = "b";
  c.set("alpha", k * beta);
  c.set("beta", beta);
  return c;
}

// Generalized gamma U (beta = 0.5, k = 2) with h(t) = exp(-rho t^2), to be
// fitted by the gamma model of scenario (a).
inline ModelConfig scenario_misspecified(double rho) {
  auto c = ModelConfig::gengamma_with_trend(HazardSpec::constant(0.05), HazardSpec::constant(0.05));
  c.name = "misspecified";
  c.set("k", 2.0);
  c.set("beta", 0.5);
  c.set("rho", rho);
  return c;
}

struct SimDesign {
  std::string scenario = "a";
  ModelConfig truth;
  ModelConfig fit_config;
  std::vector<double> ages = integer_ages(1, 50);
  int n_per_age = 200;
  int replicates = 50;
  std::uint64_t seed = 1;
  FitOptions fit_options;
  // Profile intervals per replicate for these parameters (costly).
  std::vector<std::string> profile_params;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (n_per_age < 1) throw DomainError("n_per_age must be >= 1");
    if (replicates < 1) throw DomainError("replicates must be >= 1");
    (void)truth.instantiate();
    fit_config.validate();
    for (double t : ages) (void)truth.hazard1.grid_index(t);
  }
};

struct ReplicateOutcome {
  bool converged = false;
  std::string error;
  std::vector<double> values;  // natural scale, fit_config parameter order
  std::vector<double> se;
  std::vector<std::optional<ConfidenceInterval>> profile;
  double loglik = 0.0;
};

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double mean_se = 0.0;  // over replicates with a usable Hessian
  double sd = 0.0;       // divisor n, so rmse^2 = bias^2 + sd^2
  double wald_coverage = 0.0;
  double profile_coverage = std::numeric_limits<double>::quiet_NaN();
  int n = 0;
};

struct StudyReport {
  std::string scenario;
  int replicates = 0;
  int converged = 0;
  int nonconverged = 0;
  std::vector<ParameterSummary> parameters;
  std::vector<ReplicateOutcome> outcomes;

  const ParameterSummary& parameter(const std::string& n) const {
    for (const auto& p : parameters)
      if (p.name == n) return p;
    throw DomainError("study has no parameter '" + n + "'");
  }
};

inline ReplicateOutcome run_replicate(const SimDesign& d, std::size_t index) {
  ReplicateOutcome out;
  try {
    Engine eng = replicate_engine(d.seed, index);
    const auto data = simulate_dataset(d.truth, d.ages, d.n_per_age, eng);
    FitOptions fo = d.fit_options;
    fo.profile = d.profile_params;
    const auto f = fit(d.fit_config, data, fo);
    out.converged = f.convergence.converged;
    out.loglik = f.loglik_max;
    for (const auto& e : f.estimates) {
      out.values.push_back(e.value);
      out.se.push_back(e.se);
      out.profile.push_back(e.profile_ci);
    }
    if (!out.converged) out.error = f.convergence.message;
  } catch (const std::exception& e) {
    out.converged = false;
    out.error = e.what();
  }
  return out;
}

inline StudyReport summarize_study(const SimDesign& d, std::vector<ReplicateOutcome> outcomes) {
  StudyReport rep;
  rep.scenario = d.scenario;
  rep.replicates = static_cast<int>(outcomes.size());
  for (const auto& o : outcomes) (o.converged ? rep.converged : rep.nonconverged)++;
  if (rep.converged == 0) throw NumericError("no replicate converged in study '" + d.scenario + "'");

  const double z = normal_quantile(0.5 * (1.0 + d.fit_options.ci_level));
  for (std::size_t i = 0; i < d.fit_config.parameters.size(); ++i) {
    const auto& p = d.fit_config.parameters[i];
    if (!p.free || !d.truth.has(p.name)) continue;
    ParameterSummary s;
    s.name = p.name;
    s.truth = d.truth.value(p.name);
    double sum = 0.0, sq = 0.0, se_sum = 0.0, wald = 0.0, prof = 0.0;
    int n = 0, n_se = 0, n_prof = 0;
    for (const auto& o : outcomes) {
      if (!o.converged) continue;
      const double v = o.values[i];
      ++n;
      sum += v;
      sq += (v - s.truth) * (v - s.truth);
      if (std::isfinite(o.se[i])) {
        ++n_se;
        se_sum += o.se[i];
        if (std::fabs(v - s.truth) <= z * o.se[i]) wald += 1.0;
      }
      if (o.profile[i]) {
        ++n_prof;
        if (o.profile[i]->lower <= s.truth && s.truth <= o.profile[i]->upper) prof += 1.0;
      }
    }
    s.n = n;
    s.mean = sum / n;
    s.bias = s.mean - s.truth;
    s.rmse = std::sqrt(sq / n);
    s.sd = std::sqrt(std::max(0.0, sq / n - s.bias * s.bias));
    s.mean_se = n_se > 0 ? se_sum / n_se : std::numeric_limits<double>::quiet_NaN();
    s.wald_coverage = n_se > 0 ? wald / n_se : std::numeric_limits<double>::quiet_NaN();
    if (n_prof > 0) s.profile_coverage = prof / n_prof;
    rep.parameters.push_back(s);
  }
  rep.outcomes = std::move(outcomes);
  return rep;
}

// Replicates run on a pool of threads; replicate r always uses the stream
// derived from (seed, r), and results are aggregated in index order.
inline StudyReport run_study(const SimDesign& d) {
  d.validate();
  const std::size_t n = static_cast<std::size_t>(d.replicates);
  std::vector<ReplicateOutcome> outcomes(n);
  unsigned threads = d.threads ? d.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) outcomes[i] = run_replicate(d, i);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return summarize_study(d, std::move(outcomes));
}

}  // namespace tvf
