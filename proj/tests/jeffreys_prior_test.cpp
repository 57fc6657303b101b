// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <numbers>
#include <random>
#include <thread>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "ewens/jeffreys_prior.hpp"
#include "oracles.hpp"

namespace {

using namespace ewens;

TEST(JeffreysDensity, Examples) {
  EXPECT_NEAR(log_density_unnorm(1.0, 2), -std::log(2.0), 1e-15);
  EXPECT_NEAR(log_density_unnorm(2.0, 3), 0.5 * std::log(0.5 * (1.0 / 9.0 + 2.0 / 16.0)), 1e-15);
}

TEST(JeffreysDensity, TwoItemsIsHalfCauchyInSquareRoot) {
  for (double beta : {1e-8, 0.01, 0.7, 3.0, 1e5, 1e200}) {
    EXPECT_NEAR(log_density_unnorm(beta, 2), -0.5 * std::log(beta) - std::log1p(beta), 1e-12) << beta;
  }
}

TEST(JeffreysDensity, MatchesDirectSumAndFisherInformation) {
  for (int n : {2, 7, 150}) {
    for (double beta : {1e-4, 0.3, 12.0, 9e4}) {
      EXPECT_NEAR(log_density_unnorm(beta, n), std::log(oracle::jeffreys_unnorm(beta, n)), 1e-12);
      EXPECT_NEAR(log_density_unnorm(beta, n), 0.5 * std::log(fisher_information(beta, n)), 1e-12);
    }
  }
}

TEST(JeffreysDensity, RejectsInvalidArguments) {
  EXPECT_THROW(log_density_unnorm(1.0, 1), std::domain_error);
  EXPECT_THROW(log_density_unnorm(0.0, 5), std::domain_error);
  EXPECT_THROW(JeffreysPrior(1), std::domain_error);
}

TEST(NormalizingConstant, TwoItemsIsPi) {
  EXPECT_NEAR(normalizing_constant(2), std::numbers::pi, 1e-10);
  EXPECT_NEAR(normalizing_constant(2), normalizing_constant_bound(2), 1e-10);
}

TEST(NormalizingConstant, AgreesWithIndependentOracles) {
  for (int n : {3, 10, 100, 400}) {
    const double c = normalizing_constant(n);
    auto f = [n](double beta) { return oracle::jeffreys_unnorm(beta, n); };
    const double midpoint = oracle::tan_square_midpoint(f, 1.0, 400000);
    const double boost_value = oracle::boost_half_line(f);
    EXPECT_NEAR(c, midpoint, 1e-6 * c) << n;
    EXPECT_NEAR(c, boost_value, 1e-8 * c) << n;
  }
}

TEST(NormalizingConstant, ProperAndBelowBoundForAllSmallN) {
  for (int n = 2; n <= 500; ++n) {
    const JeffreysPrior prior(n);
    const double c = prior.normalizing_constant();
    ASSERT_TRUE(std::isfinite(c)) << n;
    ASSERT_LE(c, normalizing_constant_bound(n) * (1.0 + 1e-12)) << n;
  }
}

TEST(JeffreysShape, DecreasingAndLogConvexOnGrid) {
  for (int n : {2, 10, 100}) {
    std::vector<double> grid;
    for (int i = 0; i < 200; ++i) grid.push_back(std::pow(10.0, -6.0 + 12.0 * i / 199.0));
    std::vector<double> logs;
    for (double b : grid) {
      EXPECT_LT(jeffreys_log_derivative(b, n), 0.0) << n << " " << b;
      EXPECT_GT(jeffreys_log_second_derivative(b, n), 0.0) << n << " " << b;
      logs.push_back(log_density_unnorm(b, n));
    }
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      // Second divided difference on the non-uniform grid.
      const double left = (logs[i] - logs[i - 1]) / (grid[i] - grid[i - 1]);
      const double right = (logs[i + 1] - logs[i]) / (grid[i + 1] - grid[i]);
      EXPECT_GT(right - left, 0.0) << n << " " << grid[i];
    }
  }
}

TEST(JeffreysShape, DerivativesMatchFiniteDifferences) {
  for (int n : {2, 10, 100}) {
    for (double b : {0.01, 1.0, 30.0, 5000.0}) {
      const double h = 1e-4 * b;
      const double fd1 = (log_density_unnorm(b + h, n) - log_density_unnorm(b - h, n)) / (2 * h);
      const double fd2 =
          (log_density_unnorm(b + h, n) - 2 * log_density_unnorm(b, n) + log_density_unnorm(b - h, n)) / (h * h);
      EXPECT_NEAR(jeffreys_log_derivative(b, n), fd1, 1e-6 * std::abs(fd1));
      EXPECT_NEAR(jeffreys_log_second_derivative(b, n), fd2, 1e-4 * std::abs(fd2));
    }
  }
}

TEST(JeffreysShape, FirstMomentDiverges) {
  // The tail behaves like β^{-3/2}, so ∫_0^B β π dβ grows like √B without bound.
  auto identity = [](double b) { return b; };
  for (int n : {2, 10, 100, 500}) {
    const JeffreysPrior& prior = cached_jeffreys_prior(n);
    const double at_1e3 = prior.expect_below(identity, 1e3);
    const double at_1e6 = prior.expect_below(identity, 1e6);
    EXPECT_GT(at_1e6, 30.0 * at_1e3) << n;
    for (double b : {1e6, 1e9, 1e12}) {
      const double ratio = prior.expect_below(identity, 4.0 * b) / prior.expect_below(identity, b);
      EXPECT_NEAR(ratio, 2.0, 0.03) << n << " " << b;
    }
    EXPECT_GT(prior.expect_below(identity, 1e14), 1e5 * at_1e3) << n;
  }
}

TEST(JeffreysCdf, MedianOfTwoItemsIsOne) {
  EXPECT_NEAR(jeffreys_median(2), 1.0, 1e-8);
  // √β is half-Cauchy: F(β) = (2/π) atan(√β).
  for (double b : {0.01, 0.5, 4.0, 1e4}) {
    EXPECT_NEAR(jeffreys_cdf(b, 2), 2.0 / std::numbers::pi * std::atan(std::sqrt(b)), 1e-10);
  }
}

TEST(JeffreysCdf, MedianFollowsLinearRule) {
  for (int n : {50, 100, 200, 400}) {
    const double rule = 0.36 * n + 1.0;
    EXPECT_NEAR(jeffreys_median(n), rule, 0.1 * rule) << n;
  }
}

TEST(JeffreysCdf, QuantileRoundTrip) {
  for (int n : {2, 3, 10, 100, 1000}) {
    const JeffreysPrior& prior = cached_jeffreys_prior(n);
    for (double b : {0.1, 1.0, 10.0}) EXPECT_NEAR(prior.quantile(prior.cdf(b)), b, 1e-6 * b) << n;
    double last = 0.0;
    for (double b = 1e-6; b < 1e9; b *= 3.0) {
      const double c = prior.cdf(b);
      EXPECT_GE(c, last);
      last = c;
    }
    EXPECT_NEAR(prior.cdf(1e300), 1.0, 1e-9);
  }
}

TEST(AIntegral, Examples) {
  for (int m : {2, 5, 40}) EXPECT_NEAR(a_integral(0, m, 0), 0.0, 1e-9);
  EXPECT_NEAR(a_integral(1, 2, 1), 0.0, 1e-9);
  EXPECT_THROW(a_integral(3, 3, 0), std::domain_error);
  EXPECT_THROW(a_integral(3, 3, 4), std::domain_error);
  EXPECT_THROW(a_integral(3, 1, 1), std::domain_error);
}

TEST(AIntegral, MatchesIndependentQuadrature) {
  const std::vector<std::tuple<int, int, int>> cases{{5, 10, 3}, {9, 9, 1}, {30, 30, 30}, {29, 30, 12}};
  for (auto [items, m, k] : cases) {
    auto f = [items, m, k](double b) {
      return oracle::a_integrand(b, items, k, [m](double x) { return std::log(oracle::jeffreys_unnorm(x, m)); });
    };
    auto g = [m](double b) { return oracle::jeffreys_unnorm(b, m); };
    const double expected = std::log(oracle::boost_half_line(f)) - std::log(oracle::boost_half_line(g));
    EXPECT_NEAR(a_integral(items, m, k), expected, 1e-8) << items << " " << m << " " << k;
  }
}

TEST(AIntegral, MarginalOfKNormalizes) {
  for (int n : {2, 10, 50}) {
    const auto& row = cached_stirling_row(n);
    double total = 0.0;
    for (int k = 1; k <= n; ++k) total += std::exp(row.log_at(k) + a_integral(n, n, k));
    EXPECT_NEAR(total, 1.0, 1e-6) << n;
  }
}

TEST(PriorK, TwoItemsIsFairCoin) {
  const auto pmf = prior_k_pmf(2);
  ASSERT_EQ(pmf.size(), 2u);
  EXPECT_NEAR(pmf[0], 0.5, 1e-9);
  EXPECT_NEAR(pmf[1], 0.5, 1e-9);
  EXPECT_NEAR(prior_k_mean(2), 1.5, 1e-9);
  EXPECT_NEAR(prior_k_var(2), 0.25, 1e-9);
}

TEST(PriorK, HundredItemsIsUShapedAroundHalf) {
  const auto pmf = prior_k_pmf(100);
  double total = 0.0;
  double mean = 0.0;
  for (int k = 1; k <= 100; ++k) {
    total += pmf[static_cast<std::size_t>(k - 1)];
    mean += k * pmf[static_cast<std::size_t>(k - 1)];
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
  EXPECT_NEAR(mean, 50.0, 2.0);
  EXPECT_GT(pmf[0], pmf[49]);
  EXPECT_GT(pmf[99], pmf[49]);
  // The two ends dominate everything in the middle third.
  for (int k = 34; k <= 67; ++k) {
    EXPECT_GT(pmf[0], pmf[static_cast<std::size_t>(k - 1)]);
    EXPECT_GT(pmf[99], pmf[static_cast<std::size_t>(k - 1)]);
  }
  const double min_middle = *std::min_element(pmf.begin() + 40, pmf.begin() + 60);
  EXPECT_LT(pmf[49], 1.2 * min_middle);
}

TEST(PriorK, MomentsAgreeWithPmf) {
  for (int n : {2, 10, 50, 100}) {
    const auto pmf = prior_k_pmf(n);
    double m1 = 0.0;
    double m2 = 0.0;
    for (int k = 1; k <= n; ++k) {
      m1 += k * pmf[static_cast<std::size_t>(k - 1)];
      m2 += static_cast<double>(k) * k * pmf[static_cast<std::size_t>(k - 1)];
    }
    EXPECT_NEAR(prior_k_mean(n), m1, 1e-6 * m1) << n;
    const double var = m2 - m1 * m1;
    EXPECT_NEAR(prior_k_var(n), var, 1e-6 * var) << n;
  }
  EXPECT_NEAR(prior_k_mean(100), 50.0, 2.5);
}

TEST(DiscoveryProbability, StableAcrossLargeN) {
  for (int n : {10, 50, 100, 200, 400}) {
    const auto m = discovery_moments(n);
    EXPECT_GE(m.mean, 0.38) << n;
    EXPECT_LE(m.mean, 0.40) << n;
  }
}

TEST(DiscoveryProbability, VarianceBounded) {
  for (int n : {2, 5, 60, 700}) {
    const auto m = discovery_moments(n);
    EXPECT_GT(m.mean, 0.0);
    EXPECT_LT(m.mean, 1.0);
    EXPECT_GE(m.variance, 0.0);
    EXPECT_LE(m.variance, m.mean * (1.0 - m.mean));
  }
}

TEST(DiscoveryProbability, TwoItemsMatchesCauchyMonteCarlo) {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int draws = 1000000;
  double s = 0.0;
  double ss = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double nu = std::tan(std::numbers::pi * u(rng) / 2.0);
    const double beta = nu * nu;
    const double eta = beta / (beta + 3.0);
    s += eta;
    ss += eta * eta;
  }
  const double mean = s / draws;
  const double se = std::sqrt((ss / draws - mean * mean) / draws);
  EXPECT_NEAR(discovery_moments(2).mean, mean, 4.0 * se);
}

TEST(JeffreysPriorCache, ConcurrentReadersSeeSameValues) {
  std::vector<double> seen(4, 0.0);
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back(
        [t, &seen] { seen[static_cast<std::size_t>(t)] = cached_jeffreys_prior(777).normalizing_constant(); });
  }
  for (auto& th : pool) th.join();
  for (double v : seen) EXPECT_EQ(v, seen[0]);
}

TEST(ACache, ServesBothRowsAndReportsMisses) {
  const ACache cache = ACache::build(6);
  for (int k = 1; k <= 6; ++k) EXPECT_NEAR(cache.log_full(k), a_integral(6, 6, k), 1e-12);
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(cache.log_reduced(k), a_integral(5, 6, k), 1e-12);
  EXPECT_THROW(cache.log_full(7), std::out_of_range);
  EXPECT_THROW(cache.log_reduced(6), std::out_of_range);
  EXPECT_THROW(cache.log_full(0), std::out_of_range);
}

}  // namespace
