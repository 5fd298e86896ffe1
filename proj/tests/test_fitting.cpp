#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tvfrailty/fitting.hpp"
#include "tvfrailty/simulation.hpp"

using namespace tvf;

namespace {

double gradient_norm_at(const ModelConfig& c, const CurrentStatusDataset& d) {
  NegLoglik obj(c, d);
  const auto x = c.pack();
  obj.anchor(x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto up = x, dn = x;
    const double h = 1e-4;
    up[i] += h;
    dn[i] -= h;
    const double g = (obj.smooth(up) - obj.smooth(dn)) / (2 * h);
    s += g * g;
  }
  return std::sqrt(s);
}

}  // namespace

TEST(Fit, ExpectedCountsAreStationaryAtTruth) {
  const auto truth = scenario_a(1.0, 0.01);
  const auto d = expected_dataset(truth, integer_ages(1, 50), 200.0);
  EXPECT_LT(gradient_norm_at(truth, d), 1e-4);
}

TEST(Fit, RecoversTruthFromExpectedCounts) {
  const auto truth = scenario_a(1.0, 0.01);
  const auto d = expected_dataset(truth, integer_ages(1, 50), 200.0);
  FitOptions o;
  o.optim.gradient_tol = 1e-5;
  o.optim.gradient_rel_tol = 0.0;
  const auto f = fit(truth, d, o);
  EXPECT_TRUE(f.convergence.converged) << f.convergence.message;
  for (const auto& p : truth.parameters) EXPECT_NEAR(f.value(p.name), p.value, 1e-4 * p.value) << p.name;
  EXPECT_NEAR(f.deviance, 0.0, 1e-6);
  EXPECT_EQ(f.df, 150 - 4);
  EXPECT_DOUBLE_EQ(f.aic, -2.0 * f.loglik_max + 2.0 * 4);
  EXPECT_GE(f.loglik_max, f.loglik_initial);
}

TEST(Fit, ParameterLinkDoesNotChangeTheMaximum) {
  const auto d = simulate_dataset(scenario_a(1.0, 0.01), integer_ages(1, 50), 200, 3);
  const auto logk = fit(scenario_a(1.0, 0.01), d);
  auto c = scenario_a(1.0, 0.01);
  c.param("k").link = Link::identity;
  const auto idk = fit(c, d);
  ASSERT_TRUE(logk.convergence.converged);
  ASSERT_TRUE(idk.convergence.converged);
  EXPECT_NEAR(logk.loglik_max, idk.loglik_max, 1e-4);
  EXPECT_NEAR(logk.value("k"), idk.value("k"), 1e-3 * logk.value("k"));
  // delta-method standard errors agree across links
  EXPECT_NEAR(logk.estimate("k").se, idk.estimate("k").se, 0.02 * logk.estimate("k").se);
}

TEST(Fit, ProfileIntervalBracketsEstimate) {
  const auto d = simulate_dataset(scenario_a(1.0, 0.01), integer_ages(1, 50), 200, 4);
  FitOptions o;
  o.profile = {"k", "rho"};
  const auto f = fit(scenario_a(1.0, 0.01), d, o);
  for (const char* n : {"k", "rho"}) {
    const auto& e = f.estimate(n);
    ASSERT_TRUE(e.profile_ci);
    EXPECT_LT(e.profile_ci->lower, e.value);
    EXPECT_GT(e.profile_ci->upper, e.value);
    // near-quadratic likelihood: the interval is close to the Wald one
    EXPECT_NEAR(e.profile_ci->upper - e.profile_ci->lower, 2 * 1.96 * e.se, 0.35 * 2 * 1.96 * e.se) << n;
  }
}

TEST(Fit, FixedParameterStaysFixed) {
  const auto d = simulate_dataset(scenario_a(1.0, 0.01), integer_ages(1, 50), 200, 5);
  auto c = scenario_a(1.0, 0.01);
  c.fix("rho", 0.01);
  const auto f = fit(c, d);
  EXPECT_EQ(f.value("rho"), 0.01);
  EXPECT_FALSE(f.estimate("rho").free);
  EXPECT_EQ(f.n_params, 3u);
}

TEST(Fit, NonFiniteInitialPointNamesParameters) {
  auto c = ModelConfig::gamma_no_trend(HazardSpec::constant(20.0), HazardSpec::constant(20.0));
  c.set("k", 1e7);
  CurrentStatusDataset d;
  CurrentStatusRow r;
  r.age = 50;
  r.n = {3, 0, 0, 1};
  d.rows.push_back(r);
  FitOptions o;
  o.data_driven_start = false;
  try {
    fit(c, d, o);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("k="), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("lambda1_0="), std::string::npos);
  }
}

TEST(Fit, BadDataRejected) {
  CurrentStatusDataset d;
  EXPECT_THROW(fit(scenario_a(1.0, 0.01), d), DataError);
}

TEST(Fit, GammaKOneRhoTenthPercentStudy) {
  // sampling behaviour of the estimator for k = 1, rho = 0.01, 200 per age
  SimDesign s;
  s.truth = scenario_a(1.0, 0.01);
  s.fit_config = s.truth;
  s.replicates = 30;
  s.seed = 2024;
  const auto rep = run_study(s);
  EXPECT_GE(rep.converged, 29);
  const auto& rho = rep.parameter("rho");
  EXPECT_LT(std::fabs(rho.bias), 3.0 * rho.sd / std::sqrt(rho.n) + 5e-4);
  EXPECT_GT(rho.rmse, 0.0045 / 2);
  EXPECT_LT(rho.rmse, 0.0045 * 2);
  EXPECT_NEAR(rho.mean_se / rho.sd, 1.0, 0.4);
}
