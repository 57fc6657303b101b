// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ewens/med.hpp"
#include "ewens/quadrature.hpp"
#include "ewens/special_functions.hpp"

namespace ewens {

namespace detail {

inline void require_prior_index(int n) {
  if (n < 2) throw std::domain_error("Jeffreys prior needs n >= 2, got " + std::to_string(n));
}

// Σ_{j=1}^{n-1} j/(β+j)^p scaled by β^p when β > 1 so that huge β does not overflow.
// Returns ln of the unscaled sum.
inline double log_weighted_sum(double theta, int n, int power) {
  const double beta = std::exp(theta);
  double s = 0.0;
  if (theta > 0.0) {
    const double inv = std::exp(-theta);
    for (int j = 1; j < n; ++j) s += j / std::pow(1.0 + j * inv, power);
    return std::log(s) - power * theta;
  }
  for (int j = 1; j < n; ++j) s += j / std::pow(beta + j, power);
  return std::log(s);
}

}  // namespace detail

/// 0.5·ln[(1/β) Σ_{j=1}^{n-1} j/(β+j)²] evaluated at β = e^θ.
inline double jeffreys_log_density_unnorm_at_log(double theta, int n) {
  detail::require_prior_index(n);
  return 0.5 * (detail::log_weighted_sum(theta, n, 2) - theta);
}

/// Unnormalized log density of the Jeffreys prior, ln sqrt(I(β)).
inline double log_density_unnorm(double beta, int n) {
  detail::require_positive(beta, "log_density_unnorm");
  return jeffreys_log_density_unnorm_at_log(std::log(beta), n);
}

/// d/dβ ln π_n(β) = -1/(2β) - Σ j/(β+j)³ / Σ j/(β+j)².
inline double jeffreys_log_derivative(double beta, int n) {
  detail::require_prior_index(n);
  detail::require_positive(beta, "jeffreys_log_derivative");
  double s2 = 0.0;
  double s3 = 0.0;
  for (int j = 1; j < n; ++j) {
    const double inv = 1.0 / (beta + j);
    s2 += j * inv * inv;
    s3 += j * inv * inv * inv;
  }
  return -0.5 / beta - s3 / s2;
}

/// d²/dβ² ln π_n(β) = 1/(2β²) + [3 S4 S2 - 2 S3²] / S2².
inline double jeffreys_log_second_derivative(double beta, int n) {
  detail::require_prior_index(n);
  detail::require_positive(beta, "jeffreys_log_second_derivative");
  double s2 = 0.0;
  double s3 = 0.0;
  double s4 = 0.0;
  for (int j = 1; j < n; ++j) {
    const double inv = 1.0 / (beta + j);
    const double inv2 = inv * inv;
    s2 += j * inv2;
    s3 += j * inv2 * inv;
    s4 += j * inv2 * inv2;
  }
  return 0.5 / (beta * beta) + (3.0 * s4 * s2 - 2.0 * s3 * s3) / (s2 * s2);
}

/// π√(n(n-1)/2), the closed-form upper bound on C(n).
inline double normalizing_constant_bound(int n) {
  return std::numbers::pi * std::sqrt(0.5 * n * (n - 1.0));
}

struct JeffreysLogDensity {
  int n;
  double operator()(double theta) const { return jeffreys_log_density_unnorm_at_log(theta, n); }
};

struct DiscoveryMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// The normalized Jeffreys prior π_n for the MED concentration parameter.
/// Immutable after construction.
class JeffreysPrior {
 public:
  explicit JeffreysPrior(int n, QuadratureConfig quad = {})
      : n_(n),
        density_(PositiveLineDensity<JeffreysLogDensity>::with_fixed_split(JeffreysLogDensity{checked(n)}, quad)) {}

  int n() const { return n_; }
  const QuadratureConfig& quad() const { return density_.config(); }

  double log_norm_const() const { return density_.log_norm(); }
  double normalizing_constant() const { return std::exp(density_.log_norm()); }

  double log_density(double beta) const { return density_.log_pdf(beta); }
  double log_density_at_log(double theta) const { return JeffreysLogDensity{n_}(theta) - density_.log_norm(); }
  double density(double beta) const { return density_.pdf(beta); }

  double cdf(double beta) const { return density_.cdf(beta); }
  double quantile(double p) const { return density_.quantile(p, 0.36 * n_ + 1.0, 1e-11); }
  double median() const { return quantile(0.5); }

  template <class G>
  double expect(const G& g) const {
    return density_.expect(g);
  }

  /// E[g(β); β <= upper].
  template <class G>
  double expect_below(const G& g, double upper) const {
    return density_.expect_below(g, upper);
  }

  /// ln A(items, n, k) = ln ∫ β^k Γ(β)/Γ(β+items) π_n(β) dβ.
  double log_a_integral(int items, int k) const {
    if (items < 0) throw std::domain_error("a_integral: item count must be >= 0");
    if (k < 0 || k > items) {
      throw std::domain_error("a_integral: need 0 <= k <= items, got k=" + std::to_string(k) +
                              " items=" + std::to_string(items));
    }
    if (k == 0 && items > 0) throw std::domain_error("a_integral: A(n,m,0) diverges for n >= 1");
    const double log_c = log_norm_const();
    const int m = n_;
    auto log_integrand = [=](double theta) {
      return k * theta - log_rising_factorial_at_log(theta, items) + jeffreys_log_density_unnorm_at_log(theta, m) -
             log_c;
    };
    EndpointBehavior ends;
    ends.origin_exponent = (items == 0 ? k : k - 1.0) - 0.5;
    ends.tail_exponent = items - k + 1.5;
    return log_integrate_positive(log_integrand, quad(), ends);
  }

  /// Pr(K = k | n) = |s(n,k)| A(n,n,k) for k = 1..n (entry k-1).
  std::vector<double> prior_k_pmf() const {
    const StirlingTable& row = cached_stirling_row(n_);
    std::vector<double> pmf(static_cast<std::size_t>(n_));
    for (int k = 1; k <= n_; ++k) pmf[static_cast<std::size_t>(k - 1)] = std::exp(row.log_at(k) + log_a_integral(n_, k));
    return pmf;
  }

  /// E[K | n] = ∫ E[K|β,n] π_n(β) dβ.
  double prior_k_mean() const {
    return expect([n = n_](double beta) { return beta > 0.0 ? expected_k(beta, n) : 1.0; });
  }

  /// Var[K | n] = ∫ Var[K|β,n] π dβ + ∫ E[K|β,n]² π dβ - E[K|n]².
  double prior_k_var() const {
    const int n = n_;
    const double mean = prior_k_mean();
    const double inner = expect([n](double beta) {
      if (!(beta > 0.0)) return 1.0;
      const double e = expected_k(beta, n);
      return variance_k(beta, n) + e * e;
    });
    return inner - mean * mean;
  }

  /// Moments of the discovery probability η = β/(β+n+1).
  DiscoveryMoments discovery_moments() const {
    const double shift = n_ + 1.0;
    const double m1 = expect([shift](double beta) { return beta / (beta + shift); });
    const double m2 = expect([shift](double beta) {
      const double eta = beta / (beta + shift);
      return eta * eta;
    });
    return {m1, m2 - m1 * m1};
  }

 private:
  static int checked(int n) {
    detail::require_prior_index(n);
    return n;
  }

  int n_;
  PositiveLineDensity<JeffreysLogDensity> density_;
};

/// Process-wide memo of priors keyed by (n, quadrature settings).
inline const JeffreysPrior& cached_jeffreys_prior(int n, const QuadratureConfig& quad = {}) {
  using Key = std::tuple<int, double, int, double>;
  static std::mutex mutex;
  static std::map<Key, std::unique_ptr<const JeffreysPrior>> priors;
  const Key key{n, quad.rel_tol, quad.max_subdivisions, quad.split_point};
  std::lock_guard lock(mutex);
  auto it = priors.find(key);
  if (it == priors.end()) it = priors.emplace(key, std::make_unique<const JeffreysPrior>(n, quad)).first;
  return *it->second;
}

/// C(n) = ∫_0^∞ sqrt(I(β)) dβ.
inline double normalizing_constant(int n, const QuadratureConfig& quad = {}) {
  return cached_jeffreys_prior(n, quad).normalizing_constant();
}

inline double jeffreys_cdf(double beta, int n) { return cached_jeffreys_prior(n).cdf(beta); }
inline double jeffreys_quantile(double p, int n) { return cached_jeffreys_prior(n).quantile(p); }
inline double jeffreys_median(int n) { return cached_jeffreys_prior(n).median(); }

/// ln A(items, m, k).
inline double a_integral(int items, int m, int k, const QuadratureConfig& quad = {}) {
  return cached_jeffreys_prior(m, quad).log_a_integral(items, k);
}

inline std::vector<double> prior_k_pmf(int n) { return cached_jeffreys_prior(n).prior_k_pmf(); }
inline double prior_k_mean(int n) { return cached_jeffreys_prior(n).prior_k_mean(); }
inline double prior_k_var(int n) { return cached_jeffreys_prior(n).prior_k_var(); }
inline DiscoveryMoments discovery_moments(int n) { return cached_jeffreys_prior(n).discovery_moments(); }

/// ln A(n,n,k) and ln A(n-1,n,k) for the collapsed DPMM sweep. Immutable once built.
class ACache {
 public:
  ACache() = default;

  static ACache build(int n, const QuadratureConfig& quad = {}) {
    detail::require_prior_index(n);
    const JeffreysPrior& prior = cached_jeffreys_prior(n, quad);
    ACache cache;
    cache.n_ = n;
    cache.full_.assign(static_cast<std::size_t>(n) + 1, kNegInf);
    cache.reduced_.assign(static_cast<std::size_t>(n), kNegInf);
    for (int k = 1; k <= n; ++k) cache.full_[static_cast<std::size_t>(k)] = prior.log_a_integral(n, k);
    for (int k = 1; k <= n - 1; ++k) cache.reduced_[static_cast<std::size_t>(k)] = prior.log_a_integral(n - 1, k);
    return cache;
  }

  int n() const { return n_; }

  /// ln A(n, n, k), k = 1..n.
  double log_full(int k) const {
    if (k < 1 || k > n_) throw std::out_of_range("ACache: no entry A(n,n," + std::to_string(k) + ")");
    return full_[static_cast<std::size_t>(k)];
  }

  /// ln A(n-1, n, k), k = 1..n-1.
  double log_reduced(int k) const {
    if (k < 1 || k > n_ - 1) throw std::out_of_range("ACache: no entry A(n-1,n," + std::to_string(k) + ")");
    return reduced_[static_cast<std::size_t>(k)];
  }

 private:
  int n_ = 0;
  std::vector<double> full_;
  std::vector<double> reduced_;
};

}  // namespace ewens
