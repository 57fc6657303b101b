// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ewens/quadrature.hpp"

namespace {

using namespace ewens;

TEST(IntegrateAdaptive, PolynomialsAreExact) {
  auto r = integrate_adaptive([](double x) { return 3.0 * x * x + 2.0 * x + 1.0; }, 0.0, 2.0, 1e-12, 50);
  EXPECT_NEAR(r.value, 8.0 + 4.0 + 2.0, 1e-13);
}

TEST(IntegrateAdaptive, SmoothFunction) {
  auto r = integrate_adaptive([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1e-12, 50);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
}

TEST(IntegrateAdaptive, ThrowsWhenBudgetExhausted) {
  auto f = [](double x) { return std::sin(1e4 * x) + 1.0; };
  EXPECT_THROW(integrate_adaptive(f, 0.0, 10.0, 1e-12, 5), QuadratureError);
}

TEST(IntegrateAdaptive, ThrowsOnNonFiniteIntegrand) {
  auto f = [](double x) { return x < 0.5 ? std::nan("") : 1.0; };
  EXPECT_THROW(integrate_adaptive(f, 0.0, 1.0, 1e-12, 50), QuadratureError);
}

TEST(QuadratureConfig, RejectsBadSettings) {
  QuadratureConfig cfg;
  cfg.rel_tol = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.max_subdivisions = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.split_point = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(LogIntegratePositive, HalfCauchyKernel) {
  // ∫ β^{-1/2}/(1+β) dβ = π
  auto log_f = [](double t) { return -0.5 * t - std::log1p(std::exp(t)); };
  EXPECT_NEAR(log_integrate_positive(log_f, 0.0, QuadratureConfig{}), std::log(std::numbers::pi), 1e-10);
  EXPECT_NEAR(log_integrate_positive(log_f, QuadratureConfig{}), std::log(std::numbers::pi), 1e-10);
}

TEST(LogIntegratePositive, GammaKernelsAcrossShapes) {
  for (double a : {0.001, 0.05, 0.5, 1.0, 3.0, 250.0}) {
    auto log_density = [a](double t) { return (a - 1.0) * t - std::exp(t); };
    EndpointBehavior ends{a - 1.0, 50.0};
    const double expected = std::lgamma(a);
    EXPECT_NEAR(log_integrate_positive(log_density, QuadratureConfig{}, ends), expected,
                1e-9 * std::max(1.0, std::abs(expected)))
        << a;
  }
}

TEST(LogIntegratePositive, HeavyTailPower) {
  // ∫ 1/(1+β)^{1.1} dβ = 10
  auto log_f = [](double t) { return -1.1 * std::log1p(std::exp(t)); };
  EndpointBehavior ends{0.0, 1.1};
  EXPECT_NEAR(std::exp(log_integrate_positive(log_f, QuadratureConfig{}, ends)), 10.0, 1e-8);
}

TEST(PositiveLineDensity, ExponentialDistribution) {
  auto log_f = [](double t) { return -std::exp(t); };
  PositiveLineDensity d(log_f, QuadratureConfig{}, EndpointBehavior{0.0, 50.0});
  EXPECT_NEAR(d.log_norm(), 0.0, 1e-10);
  EXPECT_NEAR(d.cdf(1.0), 1.0 - std::exp(-1.0), 1e-10);
  EXPECT_NEAR(d.survival(2.0), std::exp(-2.0), 1e-10);
  EXPECT_NEAR(d.quantile(0.5), std::log(2.0), 1e-9);
  EXPECT_NEAR(d.expect([](double b) { return b; }), 1.0, 1e-10);
  EXPECT_NEAR(d.expect([](double b) { return b * b; }), 2.0, 1e-9);
  EXPECT_NEAR(d.expect_below([](double) { return 1.0; }, 1.0) + d.expect_above([](double) { return 1.0; }, 1.0), 1.0,
              1e-10);
}

TEST(PositiveLineDensity, QuantileFarBelowDoubleRange) {
  // Gamma(0.001, 1): Pr(X <= x) ≈ x^a / Γ(a+1) for tiny x, so ln q(p) ≈ [ln p + ln Γ(a+1)] / a.
  const double a = 0.001;
  auto log_f = [a](double t) { return (a - 1.0) * t - std::exp(t); };
  PositiveLineDensity d(log_f, QuadratureConfig{}, EndpointBehavior{a - 1.0, 50.0});
  const double expected = (std::log(0.025) + std::lgamma(a + 1.0)) / a;
  EXPECT_NEAR(d.log_quantile(0.025), expected, 1e-6 * std::abs(expected));
  EXPECT_EQ(d.quantile(0.025), 0.0);  // underflows as a plain double, by design
  EXPECT_NEAR(d.cdf_log(expected), 0.025, 1e-9);
}

TEST(PositiveLineDensity, QuantileInvertsCdf) {
  auto log_f = [](double t) { return -0.5 * t - std::log1p(std::exp(t)); };
  PositiveLineDensity d(log_f, QuadratureConfig{});
  for (double p : {1e-6, 0.01, 0.3, 0.5, 0.9, 0.999}) {
    const double q = d.quantile(p);
    EXPECT_NEAR(d.cdf(q), p, 1e-9) << p;
  }
  // Half-Cauchy in sqrt(β): median is 1.
  EXPECT_NEAR(d.quantile(0.5), 1.0, 1e-9);
  EXPECT_THROW(d.quantile(0.0), std::domain_error);
  EXPECT_THROW(d.quantile(1.0), std::domain_error);
}

TEST(LocateLogScaleMode, FindsPeak) {
  // β^{5} e^{-β} on the θ scale: g(θ) = 6θ - e^θ peaks at θ = ln 6.
  auto log_f = [](double t) { return 5.0 * t - std::exp(t); };
  const LogScaleMode m = locate_log_scale_mode(log_f);
  EXPECT_NEAR(m.theta, std::log(6.0), 1e-6);
}

}  // namespace
