// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ewens/jeffreys_prior.hpp"
#include "ewens/med.hpp"
#include "ewens/posterior.hpp"
#include "ewens/special_functions.hpp"

namespace ewens {

/// Gamma(shape, rate) base measure on the Poisson mean.
struct PoissonGammaBase {
  double shape = 2.0;
  double rate = 0.1;

  void validate() const {
    if (!(shape > 0.0) || !(rate > 0.0)) throw std::domain_error("PoissonGammaBase: shape and rate must be > 0");
  }
};

struct ClusterStats {
  int count = 0;
  long sum = 0;

  friend bool operator==(const ClusterStats&, const ClusterStats&) = default;
};

/// ln ∫ Poisson(y|ϑ) Gamma(ϑ|a0,b0) dϑ, a negative binomial mass.
inline double log_marginal_new(long y, const PoissonGammaBase& base) {
  if (y < 0) throw std::domain_error("log_marginal_new: counts must be non-negative");
  const double a = base.shape;
  const double b = base.rate;
  const double yd = static_cast<double>(y);
  return std::lgamma(a + yd) - std::lgamma(a) - std::lgamma(yd + 1.0) + a * std::log(b / (b + 1.0)) -
         yd * std::log(b + 1.0);
}

/// Posterior predictive of y for a cluster holding `stats`: the same mass with a0+s_k, b0+m_k.
inline double log_marginal_existing(long y, const ClusterStats& stats, const PoissonGammaBase& base) {
  if (stats.count < 0 || stats.sum < 0) throw std::domain_error("log_marginal_existing: invalid cluster statistics");
  return log_marginal_new(y, {base.shape + static_cast<double>(stats.sum), base.rate + stats.count});
}

/// ln ∫ Π_i Poisson(y_i|ϑ) Gamma(ϑ|a0,b0) dϑ for the members of one cluster.
inline double log_cluster_marginal(std::span<const long> ys, const PoissonGammaBase& base) {
  double sum = 0.0;
  double log_fact = 0.0;
  for (long y : ys) {
    sum += static_cast<double>(y);
    log_fact += std::lgamma(static_cast<double>(y) + 1.0);
  }
  const double m = static_cast<double>(ys.size());
  return base.shape * std::log(base.rate) - std::lgamma(base.shape) + std::lgamma(base.shape + sum) -
         (base.shape + sum) * std::log(base.rate + m) - log_fact;
}

/// Cluster assignments plus per-cluster sufficient statistics. Labels are contiguous 0..K-1.
class DpmmState {
 public:
  DpmmState() = default;

  /// All items in a single cluster.
  static DpmmState single_cluster(std::span<const long> data, double beta = 1.0) {
    return from_labels(data, std::vector<int>(data.size(), 0), beta);
  }

  /// Arbitrary integer labels; relabelled in order of first appearance.
  static DpmmState from_labels(std::span<const long> data, std::span<const int> labels, double beta = 1.0) {
    if (data.size() != labels.size()) throw std::invalid_argument("DpmmState: data and labels differ in length");
    if (data.empty()) throw std::invalid_argument("DpmmState: no data");
    for (long y : data) {
      if (y < 0) throw std::domain_error("DpmmState: counts must be non-negative");
    }
    DpmmState s;
    s.labels_.assign(labels.begin(), labels.end());
    s.beta_ = beta;
    s.canonicalize(data);
    return s;
  }

  int n() const { return static_cast<int>(labels_.size()); }
  int num_clusters() const { return static_cast<int>(clusters_.size()); }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<ClusterStats>& clusters() const { return clusters_; }
  double beta() const { return beta_; }
  void set_beta(double beta) { beta_ = beta; }

  Partition partition() const { return Partition::from_labels(labels_); }

  /// Relabels clusters by first appearance and rebuilds the statistics from scratch.
  void canonicalize(std::span<const long> data) {
    std::vector<int> remap;
    std::vector<int> seen_labels;
    std::vector<int> fresh(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto it = std::find(seen_labels.begin(), seen_labels.end(), labels_[i]);
      if (it == seen_labels.end()) {
        seen_labels.push_back(labels_[i]);
        fresh[i] = static_cast<int>(seen_labels.size()) - 1;
      } else {
        fresh[i] = static_cast<int>(it - seen_labels.begin());
      }
    }
    labels_ = std::move(fresh);
    clusters_ = recompute_stats(data);
  }

  /// Statistics recomputed from the labels, for consistency checks.
  std::vector<ClusterStats> recompute_stats(std::span<const long> data) const {
    int k = 0;
    for (int l : labels_) k = std::max(k, l + 1);
    std::vector<ClusterStats> stats(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      auto& c = stats[static_cast<std::size_t>(labels_[i])];
      ++c.count;
      c.sum += data[i];
    }
    return stats;
  }

  /// Removes item i from its cluster; an emptied cluster takes the last label's place.
  void remove(std::size_t i, long y) {
    const int label = labels_[i];
    auto& c = clusters_[static_cast<std::size_t>(label)];
    --c.count;
    c.sum -= y;
    labels_[i] = -1;
    if (c.count == 0) {
      const int last = num_clusters() - 1;
      if (label != last) {
        clusters_[static_cast<std::size_t>(label)] = clusters_.back();
        for (int& l : labels_) {
          if (l == last) l = label;
        }
      }
      clusters_.pop_back();
    }
  }

  /// Adds item i to cluster `label`, where label == K opens a new cluster.
  void add(std::size_t i, long y, int label) {
    if (label == num_clusters()) clusters_.push_back({});
    auto& c = clusters_[static_cast<std::size_t>(label)];
    ++c.count;
    c.sum += y;
    labels_[i] = label;
  }

 private:
  std::vector<int> labels_;
  std::vector<ClusterStats> clusters_;
  double beta_ = 1.0;
};

namespace detail {

// Draws an index with probability proportional to exp(log_weights).
inline int sample_log_weights(std::vector<double>& log_weights, Rng& rng) {
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(mx)) throw std::runtime_error("dpmm: non-finite reassignment weights");
  double total = 0.0;
  for (double& w : log_weights) {
    w = std::exp(w - mx);
    if (!std::isfinite(w)) throw std::runtime_error("dpmm: non-finite reassignment weights");
    total += w;
  }
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    acc += log_weights[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(log_weights.size()) - 1;
}

template <class LogWeights>
void collapsed_sweep(DpmmState& state, std::span<const long> data, Rng& rng, const LogWeights& cluster_weights) {
  if (static_cast<int>(data.size()) != state.n()) throw std::invalid_argument("dpmm sweep: data size mismatch");
  state.canonicalize(data);
  std::vector<double> log_weights;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const long y = data[i];
    state.remove(i, y);
    cluster_weights(state, y, log_weights);
    const int chosen = sample_log_weights(log_weights, rng);
    state.add(i, y, chosen);
  }
}

}  // namespace detail

/// Normalized reassignment probabilities for item i under the Gamma-prior sweep, with item i removed.
inline std::vector<double> reassignment_log_weights_gamma(const DpmmState& removed, long y,
                                                          const PoissonGammaBase& base) {
  std::vector<double> w;
  w.reserve(removed.clusters().size() + 1);
  for (const auto& c : removed.clusters()) {
    w.push_back(std::log(static_cast<double>(c.count)) + log_marginal_existing(y, c, base));
  }
  w.push_back(std::log(removed.beta()) + log_marginal_new(y, base));
  return w;
}

/// Log weights for item i with β integrated out under the Jeffreys prior:
/// m_k A(n,n,K)/A(n-1,n,K) p(y|cluster k) for existing clusters, A(n,n,K+1)/A(n-1,n,K) p(y|G0) for a new one,
/// where K counts clusters after removing i.
inline std::vector<double> reassignment_log_weights_jeffreys(const DpmmState& removed, long y,
                                                             const PoissonGammaBase& base, const ACache& cache) {
  const int k_minus = removed.num_clusters();
  const double log_den = cache.log_reduced(k_minus);
  const double log_join = cache.log_full(k_minus) - log_den;
  const double log_open = cache.log_full(k_minus + 1) - log_den;
  std::vector<double> w;
  w.reserve(removed.clusters().size() + 1);
  for (const auto& c : removed.clusters()) {
    w.push_back(std::log(static_cast<double>(c.count)) + log_join + log_marginal_existing(y, c, base));
  }
  w.push_back(log_open + log_marginal_new(y, base));
  return w;
}

/// One collapsed Gibbs sweep over the assignments with β held at state.beta().
inline void gibbs_sweep_fixed_beta(DpmmState& state, std::span<const long> data, const PoissonGammaBase& base,
                                   Rng& rng) {
  base.validate();
  detail::collapsed_sweep(state, data, rng, [&](const DpmmState& s, long y, std::vector<double>& w) {
    w = reassignment_log_weights_gamma(s, y, base);
  });
}

/// One collapsed Gibbs sweep with β carried in the state, followed by the augmented-Gamma update of β.
inline void gibbs_sweep_gamma(DpmmState& state, std::span<const long> data, const PoissonGammaBase& base, double a,
                              double b, Rng& rng) {
  validate_prior(GammaSpec{a, b});
  gibbs_sweep_fixed_beta(state, data, base, rng);
  state.set_beta(escobar_west_update(state.beta(), state.n(), state.num_clusters(), a, b, rng));
}

/// One collapsed Gibbs sweep with β marginalized under the Jeffreys prior π_n.
inline void gibbs_sweep_marginal_jeffreys(DpmmState& state, std::span<const long> data, const PoissonGammaBase& base,
                                          const ACache& cache, Rng& rng) {
  base.validate();
  if (cache.n() != state.n()) {
    throw std::out_of_range("gibbs_sweep_marginal_jeffreys: cache built for n=" + std::to_string(cache.n()) +
                            ", state has n=" + std::to_string(state.n()));
  }
  detail::collapsed_sweep(state, data, rng, [&](const DpmmState& s, long y, std::vector<double>& w) {
    w = reassignment_log_weights_jeffreys(s, y, base, cache);
  });
}

/// Empirical Pr(K = k) for k = 1..n (entry k-1) from a trace of cluster counts.
inline std::vector<double> posterior_k_distribution(std::span<const int> k_trace, int n) {
  if (k_trace.size() < 1000) {
    throw std::invalid_argument("posterior_k_distribution: need at least 1000 retained sweeps, have " +
                                std::to_string(k_trace.size()));
  }
  std::vector<double> pmf(static_cast<std::size_t>(n), 0.0);
  for (int k : k_trace) {
    if (k < 1 || k > n) throw std::out_of_range("posterior_k_distribution: K out of range");
    pmf[static_cast<std::size_t>(k - 1)] += 1.0;
  }
  for (double& p : pmf) p /= static_cast<double>(k_trace.size());
  return pmf;
}

struct DpmmRunConfig {
  int burn_in = 2000;
  int sweeps = 10000;  // retained
  std::uint64_t seed = 1;
  double initial_beta = 1.0;  // Gamma variant only
};

struct DpmmRun {
  std::vector<int> k_trace;       // retained sweeps
  std::vector<double> beta_trace;  // Gamma variant only
};

/// Runs either sweep variant from the all-in-one-cluster start. `on_sweep` sees each retained state.
template <class OnSweep>
DpmmRun run_dpmm(std::span<const long> data, const PoissonGammaBase& base, const PriorSpec& prior,
                 const DpmmRunConfig& cfg, const OnSweep& on_sweep) {
  if (data.empty()) throw std::invalid_argument("run_dpmm: no data");
  if (cfg.burn_in < 0 || cfg.sweeps < 1) throw std::invalid_argument("run_dpmm: invalid sweep counts");
  validate_prior(prior);
  Rng rng(cfg.seed);
  DpmmState state = DpmmState::single_cluster(data, cfg.initial_beta);
  DpmmRun run;
  run.k_trace.reserve(static_cast<std::size_t>(cfg.sweeps));
  const GammaSpec* gamma = std::get_if<GammaSpec>(&prior);
  ACache cache;
  if (!gamma) {
    const int index = std::get<JeffreysSpec>(prior).n;
    if (index != static_cast<int>(data.size())) {
      throw std::invalid_argument("run_dpmm: Jeffreys index must equal the number of observations");
    }
    cache = ACache::build(index);
  }
  for (int s = 0; s < cfg.burn_in + cfg.sweeps; ++s) {
    if (gamma) {
      gibbs_sweep_gamma(state, data, base, gamma->shape, gamma->rate, rng);
    } else {
      gibbs_sweep_marginal_jeffreys(state, data, base, cache, rng);
    }
    if (s >= cfg.burn_in) {
      run.k_trace.push_back(state.num_clusters());
      if (gamma) run.beta_trace.push_back(state.beta());
      on_sweep(state);
    }
  }
  return run;
}

inline DpmmRun run_dpmm(std::span<const long> data, const PoissonGammaBase& base, const PriorSpec& prior,
                        const DpmmRunConfig& cfg) {
  return run_dpmm(data, base, prior, cfg, [](const DpmmState&) {});
}

}  // namespace ewens
