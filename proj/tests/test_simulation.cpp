#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tvfrailty/simulation.hpp"

using namespace tvf;

TEST(Simulate, Deterministic) {
  const auto c = scenario_a(0.5, 0.005);
  const auto ages = integer_ages(1, 20);
  const auto a = simulate_dataset(c, ages, 50, 7), b = simulate_dataset(c, ages, 50, 7);
  const auto other = simulate_dataset(c, ages, 50, 8);
  bool differs = false;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    EXPECT_EQ(a.rows[i].n, b.rows[i].n);
    EXPECT_EQ(a.rows[i].paired_total(), 50.0);
    differs |= a.rows[i].n != other.rows[i].n;
  }
  EXPECT_TRUE(differs);
}

TEST(Simulate, ZeroHazardGivesNoEvents) {
  auto c = ModelConfig::gamma_no_trend(HazardSpec::constant(0.0), HazardSpec::constant(0.0));
  c.set("k", 1e8);
  const auto d = simulate_dataset(c, integer_ages(1, 10), 100, 1);
  for (const auto& r : d.rows) EXPECT_EQ(r.n[0], 100.0);
}

TEST(Simulate, CellFrequenciesMatchProbabilities) {
  auto c = ModelConfig::gamma_no_trend(HazardSpec::constant(0.05), HazardSpec::constant(0.05));
  c.set("k", 1.0);
  const std::vector<double> ages{10};
  const int n = 1000000;
  const auto d = simulate_dataset(c, ages, n, 11);
  const double p[4] = {0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(d.rows[0].n[i] / n, p[i], 3.0 * std::sqrt(p[i] * (1 - p[i]) / n)) << i;
}

TEST(Simulate, TimeVaryingFrequenciesMatchTable) {
  const auto c = scenario_misspecified(0.003);
  const std::vector<double> ages{5, 25, 45};
  const int n = 200000;
  const auto d = simulate_dataset(c, ages, n, 12);
  const auto m = c.instantiate();
  const auto t = bivariate_table(m.frailty, m.hazard1, m.hazard2, ages);
  for (std::size_t a = 0; a < ages.size(); ++a) {
    const double p[4] = {t.cells[a].s00, t.cells[a].s01, t.cells[a].s10, t.cells[a].s11};
    for (int i = 0; i < 4; ++i)
      EXPECT_NEAR(d.rows[a].n[i] / n, p[i], 4.0 * std::sqrt(p[i] * (1 - p[i]) / n)) << ages[a] << " " << i;
  }
}

TEST(Sampler, GenGammaMatchesCdf) {
  for (auto [k, beta] : {std::pair{0.4, 1.7}, std::pair{2.0, 0.5}}) {
    const auto p = GenGammaParams::unit_mean(k, beta);
    Engine eng(21);
    std::vector<double> x(20000);
    for (auto& v : x) v = draw_gengamma(p, eng);
    const double dks = oracle::ks_statistic(x, [&](double u) { return gengamma_cdf(p, u); });
    EXPECT_GT(oracle::ks_pvalue(dks, x.size()), 1e-3) << k << " " << beta;
  }
}

TEST(Study, SummaryIdentities) {
  SimDesign s;
  s.truth = scenario_a(1.0, 0.01);
  s.fit_config = s.truth;
  s.ages = integer_ages(1, 40);
  s.replicates = 6;
  s.seed = 5;
  s.threads = 1;
  const auto rep = run_study(s);
  EXPECT_EQ(rep.converged + rep.nonconverged, 6);
  for (const auto& p : rep.parameters) {
    EXPECT_NEAR(p.rmse * p.rmse, p.bias * p.bias + p.sd * p.sd, 1e-12 * (1 + p.rmse * p.rmse)) << p.name;
    EXPECT_GE(p.wald_coverage, 0.0);
    EXPECT_LE(p.wald_coverage, 1.0);
    EXPECT_TRUE(std::isnan(p.profile_coverage));
  }
  // every replicate is reproducible on its own
  const auto again = run_replicate(s, 3);
  EXPECT_EQ(again.values, rep.outcomes[3].values);
}

TEST(Study, ThreadCountDoesNotChangeResults) {
  SimDesign s;
  s.truth = scenario_a(1.0, 0.01);
  s.fit_config = s.truth;
  s.ages = integer_ages(1, 30);
  s.replicates = 4;
  s.threads = 1;
  const auto one = run_study(s);
  s.threads = 3;
  const auto three = run_study(s);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(one.outcomes[i].values, three.outcomes[i].values);
}

TEST(Study, ProfileCoverageRecorded) {
  SimDesign s;
  s.truth = scenario_a(1.0, 0.01);
  s.fit_config = s.truth;
  s.ages = integer_ages(1, 40);
  s.replicates = 2;
  s.profile_params = {"rho"};
  const auto rep = run_study(s);
  EXPECT_FALSE(std::isnan(rep.parameter("rho").profile_coverage));
  EXPECT_TRUE(std::isnan(rep.parameter("k").profile_coverage));
}

TEST(Study, InvalidDesignRejected) {
  SimDesign s;
  s.truth = scenario_a(1.0, 0.01);
  s.fit_config = s.truth;
  s.replicates = 0;
  EXPECT_THROW(run_study(s), DomainError);
}

TEST(Scenarios, PackingsAgree) {
  const auto b = scenario_b(0.2, 0.7);
  EXPECT_NEAR(b.k_value(), 0.2, 1e-15);
  EXPECT_NEAR(b.beta_value(), 0.7, 1e-15);
  const auto m = scenario_misspecified(0.01);
  EXPECT_EQ(m.value("k"), 2.0);
  EXPECT_EQ(m.value("beta"), 0.5);
}
