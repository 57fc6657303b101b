// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ewens/jeffreys_prior.hpp"
#include "ewens/med.hpp"
#include "ewens/quadrature.hpp"
#include "ewens/special_functions.hpp"

namespace ewens {

struct JeffreysSpec {
  int n = 2;
};

struct GammaSpec {
  double shape = 0.001;
  double rate = 0.001;
};

/// Prior on β: Jeffreys(n) or Gamma(shape, rate).
using PriorSpec = std::variant<JeffreysSpec, GammaSpec>;

inline void validate_prior(const PriorSpec& prior) {
  if (const auto* j = std::get_if<JeffreysSpec>(&prior)) {
    detail::require_prior_index(j->n);
  } else {
    const auto& g = std::get<GammaSpec>(prior);
    if (!(g.shape > 0.0) || !(g.rate > 0.0)) throw std::domain_error("Gamma prior needs shape > 0 and rate > 0");
  }
}

inline std::string prior_name(const PriorSpec& prior) {
  if (const auto* j = std::get_if<JeffreysSpec>(&prior)) return "jeffreys(n=" + std::to_string(j->n) + ")";
  const auto& g = std::get<GammaSpec>(prior);
  char buf[96];
  std::snprintf(buf, sizeof buf, "gamma(shape=%g,rate=%g)", g.shape, g.rate);
  return buf;
}

/// Unnormalized log prior density at β = e^θ.
inline double log_prior_density_at_log(const PriorSpec& prior, double theta) {
  if (const auto* j = std::get_if<JeffreysSpec>(&prior)) return jeffreys_log_density_unnorm_at_log(theta, j->n);
  const auto& g = std::get<GammaSpec>(prior);
  return (g.shape - 1.0) * theta - g.rate * std::exp(theta);
}

inline void validate_counts(int n, int k) {
  if (n < 1 || k < 1 || k > n) {
    throw std::domain_error("need 1 <= k <= n, got n=" + std::to_string(n) + " k=" + std::to_string(k));
  }
}

/// k ln β + lnΓ(β) - lnΓ(β+n) + ln prior(β), unnormalized, at β = e^θ.
inline double log_posterior_given_k_at_log(double theta, int n, int k, const PriorSpec& prior) {
  return k * theta - log_rising_factorial_at_log(theta, n) + log_prior_density_at_log(prior, theta);
}

inline double log_posterior_given_k(double beta, int n, int k, const PriorSpec& prior) {
  detail::require_beta(beta);
  validate_counts(n, k);
  validate_prior(prior);
  return log_posterior_given_k_at_log(std::log(beta), n, k, prior);
}

/// Random-walk step on ln β: 1 for n <= 300, sqrt(0.05) above.
inline double default_proposal_sd(int n) { return n <= 300 ? 1.0 : std::sqrt(0.05); }

struct MCMCConfig {
  int iterations = 100000;  // retained draws after burn-in
  int burn_in = 5000;
  double proposal_sd = 1.0;
  std::uint64_t seed = 1;
  double initial_beta = 1.0;

  void validate() const {
    if (iterations <= burn_in || burn_in < 0) throw std::invalid_argument("MCMCConfig: need iterations > burn_in >= 0");
    if (!(proposal_sd > 0.0)) throw std::invalid_argument("MCMCConfig: proposal_sd must be > 0");
    if (!(initial_beta > 0.0)) throw std::invalid_argument("MCMCConfig: initial_beta must be > 0");
  }
};

struct Chain {
  std::vector<double> draws;  // post burn-in
  double acceptance_rate = 1.0;
  long accepted = 0;
  long proposals = 0;
  MCMCConfig config;
  std::vector<std::string> warnings;
};

/// Metropolis on θ = ln β with θ' ~ N(θ, sd²). `log_target_at_log` is the log density of β at β = e^θ;
/// the Jacobian e^θ is added here.
template <class LogTarget>
Chain random_walk_metropolis(const LogTarget& log_target_at_log, const MCMCConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> step(0.0, cfg.proposal_sd);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double theta = std::log(cfg.initial_beta);
  double current = log_target_at_log(theta) + theta;
  if (!std::isfinite(current)) throw std::domain_error("random_walk_metropolis: target is not finite at the initial value");

  Chain chain;
  chain.config = cfg;
  chain.draws.reserve(static_cast<std::size_t>(cfg.iterations));
  const long total = static_cast<long>(cfg.iterations) + cfg.burn_in;
  for (long it = 0; it < total; ++it) {
    const double proposal = theta + step(rng);
    const double candidate = log_target_at_log(proposal) + proposal;
    const double log_u = std::log(unif(rng));
    const bool accept = log_u < candidate - current;
    if (accept) {
      theta = proposal;
      current = candidate;
    }
    if (it >= cfg.burn_in) {
      chain.draws.push_back(std::max(std::exp(theta), kMinBeta));
      ++chain.proposals;
      if (accept) ++chain.accepted;
    }
  }
  chain.acceptance_rate = static_cast<double>(chain.accepted) / static_cast<double>(chain.proposals);
  if (chain.acceptance_rate < 0.1 || chain.acceptance_rate > 0.9) {
    chain.warnings.push_back("acceptance rate " + std::to_string(chain.acceptance_rate) +
                             " outside [0.1, 0.9]; consider changing proposal_sd");
  }
  return chain;
}

/// Random-walk Metropolis for β given the sufficient statistic K = k.
inline Chain rw_mh_sample(int n, int k, const PriorSpec& prior, const MCMCConfig& cfg) {
  validate_counts(n, k);
  validate_prior(prior);
  return random_walk_metropolis(
      [&](double theta) { return log_posterior_given_k_at_log(theta, n, k, prior); }, cfg);
}

/// Random-walk Metropolis for β given a full observed partition.
inline Chain rw_mh_sample(const Partition& data, const PriorSpec& prior, const MCMCConfig& cfg) {
  if (data.empty()) throw InvalidPartition("rw_mh_sample: empty partition");
  validate_prior(prior);
  return random_walk_metropolis(
      [&](double theta) {
        const double beta = std::exp(theta);
        if (!(beta >= kMinBeta) || !std::isfinite(beta)) return kNegInf;
        return log_pmf_sizes(data, beta) + log_prior_density_at_log(prior, theta);
      },
      cfg);
}

namespace detail {

// ln of a Gamma(shape, 1) draw; for shape < 1 uses G(shape) = G(shape+1)·U^{1/shape} in log space.
inline double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return std::log(g) + std::log(u) / shape;
}

inline double beta_variate(double a, double b, Rng& rng) {
  const double la = log_gamma_variate(a, rng);
  const double lb = log_gamma_variate(b, rng);
  // x/(x+y) computed from logs
  return 1.0 / (1.0 + std::exp(lb - la));
}

}  // namespace detail

/// One data-augmentation update of β under a Gamma(a, b) prior given K = k:
/// η ~ Beta(β+1, n), then β ~ w·Gamma(a+k, b-ln η) + (1-w)·Gamma(a+k-1, b-ln η)
/// with w/(1-w) = (a+k-1)/(n(b-ln η)).
inline double escobar_west_update(double beta, int n, int k, double a, double b, Rng& rng) {
  const double eta = detail::beta_variate(beta + 1.0, static_cast<double>(n), rng);
  const double rate = b - std::log(eta);
  const double log_odds = std::log(a + k - 1.0) - std::log(static_cast<double>(n)) - std::log(rate);
  const double w = 1.0 / (1.0 + std::exp(-log_odds));
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double shape = u < w ? a + k : a + k - 1.0;
  const double log_beta = detail::log_gamma_variate(shape, rng) - std::log(rate);
  return std::clamp(std::exp(log_beta), kMinBeta, std::numeric_limits<double>::max());
}

/// Gibbs sampler for β under a Gamma(a, b) prior using the latent-η augmentation.
inline Chain escobar_west_sample(int n, int k, double a, double b, const MCMCConfig& cfg) {
  validate_counts(n, k);
  validate_prior(GammaSpec{a, b});
  cfg.validate();
  if (!(a + k - 1.0 > 0.0)) throw std::domain_error("escobar_west_sample: requires a + k - 1 > 0");
  Rng rng(cfg.seed);
  Chain chain;
  chain.config = cfg;
  chain.draws.reserve(static_cast<std::size_t>(cfg.iterations));
  double beta = cfg.initial_beta;
  const long total = static_cast<long>(cfg.iterations) + cfg.burn_in;
  for (long it = 0; it < total; ++it) {
    beta = escobar_west_update(beta, n, k, a, b, rng);
    if (it >= cfg.burn_in) chain.draws.push_back(beta);
  }
  chain.proposals = chain.accepted = static_cast<long>(chain.draws.size());
  chain.acceptance_rate = 1.0;
  return chain;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Linear interpolation between order statistics: position (N-1)p in the sorted sample.
inline double empirical_quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("empirical_quantile: p must lie in [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Equal-tail interval at the given level from a sample.
inline Interval equal_tail_interval(std::span<const double> draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::domain_error("credible level must lie in (0,1)");
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const double tail = 0.5 * (1.0 - level);
  return {empirical_quantile_sorted(sorted, tail), empirical_quantile_sorted(sorted, 1.0 - tail)};
}

inline constexpr std::size_t kMinChainDraws = 1000;

inline Interval credible_interval(const Chain& chain, double level) {
  if (chain.draws.size() < kMinChainDraws) {
    throw std::invalid_argument("credible_interval: need at least 1000 post burn-in draws, have " +
                                std::to_string(chain.draws.size()));
  }
  return equal_tail_interval(chain.draws, level);
}

inline double sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("sample_mean: empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Monte Carlo standard error of the mean by non-overlapping batch means.
inline double batch_means_se(std::span<const double> xs, int batches = 50) {
  if (batches < 2) throw std::invalid_argument("batch_means_se: need at least 2 batches");
  const std::size_t size = xs.size() / static_cast<std::size_t>(batches);
  if (size < 1) throw std::invalid_argument("batch_means_se: fewer draws than batches");
  std::vector<double> means(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    means[static_cast<std::size_t>(b)] = sample_mean(xs.subspan(static_cast<std::size_t>(b) * size, size));
  }
  const double grand = sample_mean(means);
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double var_of_batch_mean = ss / (batches - 1.0);
  return std::sqrt(var_of_batch_mean / batches);
}

struct PosteriorSummary {
  double level = 0.95;
  double beta_mean = 0.0;
  Interval beta_interval;
  double eta_mean = 0.0;
  Interval eta_interval;
  std::optional<double> beta_mean_se;      // MCMC only
  std::optional<double> acceptance_rate;   // MCMC only
};

/// Discovery probability η = β/(β+n+1).
inline double discovery_probability(double beta, int n) { return beta / (beta + n + 1.0); }

struct PosteriorLogDensity {
  int n;
  int k;
  PriorSpec prior;
  double operator()(double theta) const { return log_posterior_given_k_at_log(theta, n, k, prior); }
};

/// The posterior of β given K = k, normalized by quadrature.
class KPosterior {
 public:
  KPosterior(int n, int k, PriorSpec prior, QuadratureConfig quad = {})
      : n_(n), k_(k), density_(make_density(n, k, std::move(prior), quad)) {}

  int n() const { return n_; }
  int k() const { return k_; }
  const PositiveLineDensity<PosteriorLogDensity>& density() const { return density_; }

  double mean() const {
    return density_.expect([](double beta) { return beta; });
  }

  double eta_mean() const {
    return density_.expect([n = n_](double beta) { return discovery_probability(beta, n); });
  }

  Interval interval(double level) const {
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("credible level must lie in (0,1)");
    const double tail = 0.5 * (1.0 - level);
    return {density_.quantile(tail), density_.quantile(1.0 - tail)};
  }

  /// Equal-tail interval for η, solved in η coordinates: P(η <= e) = cdf_β(e(n+1)/(1-e)).
  Interval eta_interval(double level) const {
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("credible level must lie in (0,1)");
    const double tail = 0.5 * (1.0 - level);
    return {eta_quantile(tail), eta_quantile(1.0 - tail)};
  }

  PosteriorSummary summary(double level) const {
    PosteriorSummary s;
    s.level = level;
    s.beta_mean = mean();
    s.beta_interval = interval(level);
    s.eta_mean = eta_mean();
    s.eta_interval = eta_interval(level);
    return s;
  }

 private:
  static PositiveLineDensity<PosteriorLogDensity> make_density(int n, int k, PriorSpec prior,
                                                              const QuadratureConfig& quad) {
    validate_counts(n, k);
    validate_prior(prior);
    EndpointBehavior ends;
    if (const auto* g = std::get_if<GammaSpec>(&prior)) {
      ends.origin_exponent = g->shape + k - 2.0;
      ends.tail_exponent = n - k + 1.0 - g->shape;
    } else {
      ends.origin_exponent = k - 1.5;
      ends.tail_exponent = n - k + 1.5;
    }
    return PositiveLineDensity<PosteriorLogDensity>(PosteriorLogDensity{n, k, std::move(prior)}, quad, ends);
  }

  double eta_quantile(double p) const {
    const double scale = n_ + 1.0;
    auto beta_of = [scale](double e) { return e * scale / (1.0 - e); };
    auto h = [&](double e) {
      const double x = beta_of(e);
      return p < 0.5 ? density_.cdf(x) - p : (1.0 - p) - density_.survival(x);
    };
    double lo = 0.0;
    double hi = 1.0;
    double e = discovery_probability(density_.quantile(p), n_);
    for (int it = 0; it < 200; ++it) {
      const double value = h(e);
      if (value == 0.0) return e;
      if (value < 0.0) {
        lo = e;
      } else {
        hi = e;
      }
      // density of η: p_β(β(e)) · (n+1)/(1-e)²
      const double slope = density_.pdf(beta_of(e)) * scale / ((1.0 - e) * (1.0 - e));
      double next = e - value / slope;
      if (!(slope > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
      if (std::abs(next - e) < 1e-14 || hi - lo < 1e-14) return next;
      e = next;
    }
    throw QuadratureError("eta quantile: root finding did not converge");
  }

  int n_;
  int k_;
  PositiveLineDensity<PosteriorLogDensity> density_;
};

/// Deterministic posterior summary for β and η by one-dimensional quadrature.
inline PosteriorSummary quadrature_posterior_summary(int n, int k, const PriorSpec& prior, double level = 0.95,
                                                     const QuadratureConfig& quad = {}) {
  return KPosterior(n, k, prior, quad).summary(level);
}

/// Summary of a β chain; η intervals map the β quantiles through the monotone η(β).
inline PosteriorSummary chain_posterior_summary(const Chain& chain, int n, double level = 0.95) {
  PosteriorSummary s;
  s.level = level;
  s.beta_mean = sample_mean(chain.draws);
  s.beta_interval = credible_interval(chain, level);
  std::vector<double> eta(chain.draws.size());
  std::transform(chain.draws.begin(), chain.draws.end(), eta.begin(),
                 [n](double beta) { return discovery_probability(beta, n); });
  s.eta_mean = sample_mean(eta);
  s.eta_interval = equal_tail_interval(eta, level);
  s.beta_mean_se = batch_means_se(chain.draws);
  s.acceptance_rate = chain.acceptance_rate;
  return s;
}

/// Runs the sampler matching the prior: random-walk Metropolis for Jeffreys, Escobar-West for Gamma.
inline Chain sample_posterior(int n, int k, const PriorSpec& prior, const MCMCConfig& cfg) {
  if (const auto* g = std::get_if<GammaSpec>(&prior)) return escobar_west_sample(n, k, g->shape, g->rate, cfg);
  return rw_mh_sample(n, k, prior, cfg);
}

}  // namespace ewens
