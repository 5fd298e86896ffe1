#pragma once

// Paired current status data and the multinomial likelihood.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tvfrailty/errors.hpp"
#include "tvfrailty/model.hpp"
#include "tvfrailty/survival.hpp"

namespace tvf {

// Counts at one age. Cell n[2i + j] holds outcome (test 1 = i, test 2 = j),
// 1 meaning the event has occurred. The m fields count individuals with only
// one test result. Counts are stored as doubles so that expected counts can
// be represented; files carry integers.
struct CurrentStatusRow {
  double age = 0.0;
  std::array<double, 4> n{};  // n00, n01, n10, n11
  double m0x = 0.0, m1x = 0.0;
  double mx0 = 0.0, mx1 = 0.0;

  double paired_total() const { return n[0] + n[1] + n[2] + n[3]; }
  double total() const { return paired_total() + m0x + m1x + mx0 + mx1; }
};

struct CurrentStatusDataset {
  std::vector<CurrentStatusRow> rows;

  std::vector<double> ages() const {
    std::vector<double> a;
    for (const auto& r : rows) a.push_back(r.age);
    return a;
  }

  // Ages must be nondecreasing here; repeated ages are pooled by the
  // likelihood. File readers additionally require strictly ascending ages.
  void validate() const {
    if (rows.empty()) throw DataError("dataset has no rows");
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (!(r.age >= 0.0) || !std::isfinite(r.age))
        throw DataError("row " + std::to_string(i + 1) + ": age must be finite and nonnegative");
      if (i > 0 && r.age < rows[i - 1].age)
        throw DataError("row " + std::to_string(i + 1) + ": ages must be ascending");
      for (double c : {r.n[0], r.n[1], r.n[2], r.n[3], r.m0x, r.m1x, r.mx0, r.mx1})
        if (!(c >= 0.0) || !std::isfinite(c))
          throw DataError("row " + std::to_string(i + 1) + ": counts must be finite and nonnegative");
      total += r.total();
    }
    if (!(total > 0.0)) throw DataError("dataset has no observations");
  }

  // One row per distinct age with counts summed.
  CurrentStatusDataset pooled() const {
    CurrentStatusDataset out;
    for (const auto& r : rows) {
      if (!out.rows.empty() && out.rows.back().age == r.age) {
        auto& b = out.rows.back();
        for (int c = 0; c < 4; ++c) b.n[c] += r.n[c];
        b.m0x += r.m0x;
        b.m1x += r.m1x;
        b.mx0 += r.mx0;
        b.mx1 += r.mx1;
      } else {
        out.rows.push_back(r);
      }
    }
    return out;
  }
};

// Probabilities below this with a positive count take the underflow path.
inline constexpr double kProbabilityFloor = 1e-300;

struct LoglikEvaluation {
  double value = 0.0;
  bool underflow = false;
  std::string diagnostic;
  BivariateTable table;
};

namespace detail {

inline void add_term(LoglikEvaluation& ev, double count, double p, double age, const char* what) {
  if (count == 0.0) return;
  if (!(p >= kProbabilityFloor)) {
    if (!ev.underflow)
      ev.diagnostic = std::string("probability of ") + what + " at age " + std::to_string(age) +
                      " is " + std::to_string(p) + " with a positive count";
    ev.underflow = true;
    ev.value = -std::numeric_limits<double>::infinity();
    return;
  }
  if (!ev.underflow) ev.value += count * std::log(p);
}

}  // namespace detail

// Log-likelihood for a fully specified model. The kernel is
// sum n_ij log S_ij(t) over paired observations, plus log S_m(t) or
// log(1 - S_m(t)) for observations with only test m. Returns -inf with a
// diagnostic when a needed probability underflows. A fixed quadrature
// partition may be supplied to make the value a smooth function of the
// parameters.
inline LoglikEvaluation loglik_evaluate(const ModelInstance& model, const CurrentStatusDataset& data,
                                        const Partition* fixed_partition = nullptr,
                                        const QuadratureOptions& opts = default_survival_quadrature()) {
  const auto ages = data.ages();
  LoglikEvaluation ev;
  ev.table = bivariate_table(model.frailty, model.hazard1, model.hazard2, ages, opts, fixed_partition);
  for (std::size_t a = 0; a < data.rows.size(); ++a) {
    const auto& r = data.rows[a];
    const auto& c = ev.table.cells[a];
    const double s1 = ev.table.marginal1[a], s2 = ev.table.marginal2[a];
    detail::add_term(ev, r.n[0], c.s00, r.age, "cell 00");
    detail::add_term(ev, r.n[1], c.s01, r.age, "cell 01");
    detail::add_term(ev, r.n[2], c.s10, r.age, "cell 10");
    detail::add_term(ev, r.n[3], c.s11, r.age, "cell 11");
    detail::add_term(ev, r.m0x, s1, r.age, "no event 1");
    detail::add_term(ev, r.m1x, 1.0 - s1, r.age, "event 1");
    detail::add_term(ev, r.mx0, s2, r.age, "no event 2");
    detail::add_term(ev, r.mx1, 1.0 - s2, r.age, "event 2");
  }
  return ev;
}

inline double loglik(const ModelConfig& config, std::span<const double> params,
                     const CurrentStatusDataset& data) {
  return loglik_evaluate(config.with(params).instantiate(), data).value;
}

// Log-likelihood at the values currently stored in the config.
inline double loglik(const ModelConfig& config, const CurrentStatusDataset& data) {
  return loglik_evaluate(config.instantiate(), data).value;
}

// Saturated log-likelihood: empirical proportions per age (rows at the same
// age pooled) for the paired table and for each single-test group.
inline double saturated_loglik(const CurrentStatusDataset& data) {
  double ll = 0.0;
  auto group = [&](std::initializer_list<double> counts) {
    double total = 0.0;
    for (double c : counts) total += c;
    if (total <= 0.0) return;
    for (double c : counts)
      if (c > 0.0) ll += c * std::log(c / total);
  };
  for (const auto& r : data.pooled().rows) {
    group({r.n[0], r.n[1], r.n[2], r.n[3]});
    group({r.m0x, r.m1x});
    group({r.mx0, r.mx1});
  }
  return ll;
}

// Free cells: 3 per age with paired observations, 1 per nonempty single-test
// group.
inline int free_cells(const CurrentStatusDataset& data) {
  int cells = 0;
  for (const auto& r : data.pooled().rows) {
    if (r.paired_total() > 0.0) cells += 3;
    if (r.m0x + r.m1x > 0.0) cells += 1;
    if (r.mx0 + r.mx1 > 0.0) cells += 1;
  }
  return cells;
}

struct DevianceResult {
  double deviance = 0.0;
  int df = 0;
};

inline DevianceResult deviance_from(double model_loglik, std::size_t n_free, const CurrentStatusDataset& data) {
  const double d = 2.0 * (saturated_loglik(data) - model_loglik);
  return {std::max(0.0, d), free_cells(data) - static_cast<int>(n_free)};
}

inline DevianceResult deviance(const ModelConfig& config, std::span<const double> params,
                               const CurrentStatusDataset& data) {
  return deviance_from(loglik(config, params, data), config.n_free(), data);
}

inline double aic(double loglik_value, std::size_t n_params) {
  return -2.0 * loglik_value + 2.0 * static_cast<double>(n_params);
}

// Dataset whose counts equal n times the model cell probabilities; the
// model is then a stationary point of its own likelihood.
inline CurrentStatusDataset expected_dataset(const ModelConfig& config, std::span<const double> ages,
                                             double n_per_age) {
  const auto m = config.instantiate();
  const auto table = bivariate_table(m.frailty, m.hazard1, m.hazard2, ages);
  CurrentStatusDataset d;
  for (std::size_t a = 0; a < ages.size(); ++a) {
    const auto& c = table.cells[a];
    CurrentStatusRow r;
    r.age = ages[a];
    r.n = {n_per_age * c.s00, n_per_age * c.s01, n_per_age * c.s10, n_per_age * c.s11};
    d.rows.push_back(r);
  }
  return d;
}

}  // namespace tvf
