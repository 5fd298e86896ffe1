#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "tvfrailty/distributions.hpp"

using namespace tvf;

TEST(GenGammaPdf, SpecialCases) {
  EXPECT_NEAR(gengamma_pdf({1, 1, 1}, 1.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(gengamma_pdf({1, 2, 1}, 1.0), std::exp(-1.0), 1e-15);
  // closed form beta u^{k beta - 1} e^{-(u/theta)^beta} / (theta^{k beta} Gamma(k)) at 50 digits
  const oracle::big expected = oracle::big(2) * boost::multiprecision::exp(oracle::big(-1)) /
                               boost::math::tgamma(oracle::big(0.5));
  EXPECT_NEAR(gengamma_pdf({1, 0.5, 2}, 1.0), static_cast<double>(expected), 1e-15);
}

TEST(GenGammaPdf, RejectsInvalidInput) {
  EXPECT_THROW(gengamma_pdf({1, 1, 1}, 0.0), DomainError);
  EXPECT_THROW(gengamma_pdf({1, 1, 1}, -2.0), DomainError);
  EXPECT_THROW(gengamma_pdf({-1, 1, 1}, 1.0), DomainError);
  EXPECT_THROW(gengamma_pdf({1, 0, 1}, 1.0), DomainError);
  EXPECT_THROW(gengamma_pdf({1, 1, 0}, 1.0), DomainError);
}

TEST(GenGammaMoment, Examples) {
  EXPECT_NEAR(gengamma_moment({1, 1, 1}, 1.0), 1.0, 1e-14);
  EXPECT_NEAR(gengamma_moment({0.5, 2, 1}, 1.0), 1.0, 1e-14);
  EXPECT_NEAR(gengamma_moment({1, 1, 2}, 0.5), oracle::tgamma50(1.25), 1e-14);
  EXPECT_THROW(gengamma_moment({1, 0.5, 1}, -0.6), DomainError);
}

TEST(UnitMeanTheta, Examples) {
  EXPECT_NEAR(unit_mean_theta(1, 1), 1.0, 1e-15);
  EXPECT_NEAR(unit_mean_theta(4, 1), 0.25, 1e-15);
  EXPECT_NEAR(unit_mean_theta(0.5, 2), oracle::tgamma50(0.5), 1e-14);
  oracle::Gen gen(3);
  for (int i = 0; i < 100; ++i) {
    const double k = gen.log_uniform(0.05, 1e4), b = gen.log_uniform(0.2, 5.0);
    EXPECT_NEAR(gengamma_moment(GenGammaParams::unit_mean(k, b), 1.0), 1.0, 1e-12);
  }
}

TEST(GenGamma, IntegratesToOneAndMatchesMoments) {
  oracle::Gen gen(21);
  for (int i = 0; i < 25; ++i) {
    const GenGammaParams p{gen.log_uniform(0.2, 5.0), gen.log_uniform(0.2, 5.0),
                           gen.log_uniform(0.3, 3.0)};
    // substitution u = theta v^{1/(k beta)} removes the u^{k beta - 1} pole
    const double a = p.k * p.beta;
    auto mass = [&](double r) {
      return oracle::half_line([&](double v) {
        const double u = p.theta * std::pow(v, 1.0 / a);
        if (!(u > 0.0) || !std::isfinite(u)) return 0.0;
        const double log_du = std::log(p.theta / a) + (1.0 / a - 1.0) * std::log(v);
        return std::exp(r * std::log(u) + gengamma_log_pdf(p, u) + log_du);
      });
    };
    EXPECT_NEAR(mass(0.0), 1.0, 1e-6);
    for (double r : {0.5, 1.0, 2.0, 3.0}) {
      const double m = gengamma_moment(p, r);
      EXPECT_NEAR(mass(r), m, 1e-6 * m) << "r=" << r;
    }
  }
}

TEST(GenGamma, BetaOneIsGamma) {
  oracle::Gen gen(22);
  for (int i = 0; i < 50; ++i) {
    const double k = gen.log_uniform(0.1, 20.0), theta = gen.log_uniform(0.1, 10.0);
    const double u = theta * k * gen.log_uniform(0.05, 5.0);
    const double gamma_pdf = std::pow(u, k - 1) * std::exp(-u / theta) /
                             (std::pow(theta, k) * std::tgamma(k));
    EXPECT_NEAR(gengamma_pdf({theta, k, 1.0}, u), gamma_pdf, 1e-10 * gamma_pdf);
    EXPECT_NEAR(gengamma_moment({theta, k, 1.0}, 2.0), theta * theta * k * (k + 1),
                1e-10 * theta * theta * k * (k + 1));
  }
}

TEST(GenGammaCdf, MatchesQuadratureOfPdf) {
  const GenGammaParams p{1.3, 0.7, 1.8};
  for (double u : {0.1, 0.5, 1.0, 2.5}) {
    const double a = p.k * p.beta;
    const double v_max = std::pow(u / p.theta, a);
    const double direct = oracle::interval(
        [&](double v) {
          const double x = p.theta * std::pow(v, 1.0 / a);
          return gengamma_pdf(p, x) * p.theta / a * std::pow(v, 1.0 / a - 1.0);
        },
        0.0, v_max);
    EXPECT_NEAR(gengamma_cdf(p, u), direct, 1e-10);
  }
}

TEST(EggIntegral, Examples) {
  EXPECT_NEAR(egg_integral({3, 1, 1, 0}), 2.0, 2e-8);
  EXPECT_NEAR(egg_integral({1, 1, 1, 1}), 0.5, 1e-8);
  // dense trapezoid after v = w^2 smooths the v^{1/2} factor at the origin
  const double brute = oracle::trapezoid(
      [](double w) {
        const double v = w * w;
        return std::pow(v, 0.5) * std::exp(-0.7 * v - v * v) * 2.0 * w;
      },
      0.0, 4.0, 400000);
  EXPECT_NEAR(egg_integral({1.5, 2, 1, 0.7}), brute, 1e-8 * brute);
  EXPECT_THROW(egg_integral({0, 1, 1, 0}), DomainError);
  EXPECT_THROW(egg_integral({1, 1, 1, -0.1}), DomainError);
}

TEST(EggIntegral, ScalesWithTheta) {
  const double base = egg_integral({2.2, 0.8, 1.0, 0.3});
  EXPECT_NEAR(egg_integral({2.2, 0.8, 3.5, 0.3}), 3.5 * base, 1e-8 * 3.5 * base);
}

TEST(EggIntegral, GeneralizedGammaEmbedding) {
  // density (u/theta)^{alpha-1} e^{-(u/theta)^beta} / I* equals gengamma_pdf
  oracle::Gen gen(23);
  for (int i = 0; i < 20; ++i) {
    const GenGammaParams p{gen.log_uniform(0.3, 3.0), gen.log_uniform(0.2, 5.0),
                           gen.log_uniform(0.3, 3.0)};
    const EggParams e = EggParams::from_gengamma(p);
    const double norm = egg_integral(e, 1e-10);
    for (double u : {0.05, 0.5, 1.0, 3.0}) {
      const double f = std::pow(u / p.theta, e.alpha - 1) * std::exp(-std::pow(u / p.theta, p.beta)) / norm;
      const double g = gengamma_pdf(p, u);
      EXPECT_NEAR(f, g, 1e-8 * std::max(g, 1e-300));
    }
  }
}

TEST(GenGammaQuadrature, ExpectationsAcrossShapes) {
  // E U^r against the closed form, including very small and very large k
  for (double k : {0.05, 0.2, 1.0, 5.0, 100.0, 1e6}) {
    for (double beta : {0.4, 1.0, 2.5}) {
      const auto p = GenGammaParams::unit_mean(k, beta);
      for (double r : {0.3, 1.0, 2.0}) {
        const double e = gengamma_expectation(p, [r](double u) { return std::pow(u, r); });
        const double m = gengamma_moment(p, r);
        EXPECT_NEAR(e, m, 1e-9 * m) << "k=" << k << " beta=" << beta << " r=" << r;
      }
    }
  }
}
