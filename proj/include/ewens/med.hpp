// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ewens/special_functions.hpp"

namespace ewens {

using Rng = std::mt19937_64;

inline constexpr double kMinBeta = 1e-300;

namespace detail {

inline void require_beta(double beta) {
  if (!(beta >= kMinBeta) || !std::isfinite(beta)) {
    throw std::domain_error("beta must be a positive finite number, got " + std::to_string(beta));
  }
}

}  // namespace detail

class InvalidPartition : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cluster sizes m_1..m_K of a partition of n items, kept sorted in descending order.
/// The empty partition (n = 0) is allowed as the state before the first item arrives.
class Partition {
 public:
  Partition() = default;

  explicit Partition(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    for (int m : sizes_) {
      if (m < 1) throw InvalidPartition("Partition: cluster sizes must be >= 1");
      n_ += m;
    }
    std::sort(sizes_.begin(), sizes_.end(), std::greater<>());
  }

  /// From an assignment vector of arbitrary integer labels.
  static Partition from_labels(std::span<const int> labels) {
    std::vector<int> sorted(labels.begin(), labels.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> sizes;
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
      sizes.push_back(static_cast<int>(j - i));
      i = j;
    }
    return Partition(std::move(sizes));
  }

  int n() const { return n_; }
  int num_clusters() const { return static_cast<int>(sizes_.size()); }
  bool empty() const { return n_ == 0; }
  const std::vector<int>& sizes() const { return sizes_; }

  /// r_j = number of clusters of size j, for j = 1..n (entry j-1).
  std::vector<int> multiplicities() const {
    std::vector<int> r(static_cast<std::size_t>(n_), 0);
    for (int m : sizes_) ++r[static_cast<std::size_t>(m - 1)];
    return r;
  }

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> sizes_;
  int n_ = 0;
};

/// ln p(K, m_1..m_K | β) for a labelled assignment: Γ(β)/Γ(β+n) β^K Π Γ(m_k).
inline double log_pmf_sizes(const Partition& p, double beta) {
  detail::require_beta(beta);
  if (p.empty()) throw InvalidPartition("log_pmf_sizes: empty partition");
  double s = p.num_clusters() * std::log(beta) - log_rising_factorial(beta, p.n());
  for (int m : p.sizes()) s += std::lgamma(static_cast<double>(m));
  return s;
}

/// ln p(K, r_1..r_n | β) for the unlabelled configuration with multiplicities r (entry j-1 is r_j).
inline double log_pmf_config(int n, std::span<const int> r, double beta) {
  detail::require_beta(beta);
  if (n < 1) throw InvalidPartition("log_pmf_config: n must be >= 1");
  if (static_cast<int>(r.size()) > n) throw InvalidPartition("log_pmf_config: multiplicity vector longer than n");
  long total = 0;
  int k = 0;
  double s = 0.0;
  for (std::size_t idx = 0; idx < r.size(); ++idx) {
    const int j = static_cast<int>(idx) + 1;
    if (r[idx] < 0) throw InvalidPartition("log_pmf_config: negative multiplicity");
    total += static_cast<long>(j) * r[idx];
    k += r[idx];
    s -= r[idx] * std::log(static_cast<double>(j)) + std::lgamma(r[idx] + 1.0);
  }
  if (total != n) {
    throw InvalidPartition("log_pmf_config: sum of j*r_j is " + std::to_string(total) + ", expected " +
                           std::to_string(n));
  }
  if (k < 1) throw InvalidPartition("log_pmf_config: no clusters");
  return s + std::lgamma(n + 1.0) + k * std::log(beta) - log_rising_factorial(beta, n);
}

/// Chinese-restaurant predictive for item n+1: entries m_k/(β+n) for existing clusters (in the
/// partition's size order), then β/(β+n) for a new cluster.
inline std::vector<double> crp_predictive(const Partition& p, double beta) {
  detail::require_beta(beta);
  std::vector<double> probs;
  probs.reserve(p.sizes().size() + 1);
  const double denom = beta + p.n();
  for (int m : p.sizes()) probs.push_back(m / denom);
  probs.push_back(beta / denom);
  return probs;
}

/// Sequential CRP draw of cluster labels for n items, labels 0..K-1 in order of first appearance.
inline std::vector<int> sample_assignments(int n, double beta, Rng& rng) {
  detail::require_beta(beta);
  if (n < 1) throw std::domain_error("sample_assignments: n must be >= 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> labels;
  std::vector<int> counts;
  labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    // Item i sees i previous items: new cluster with probability β/(β+i).
    const double u = unif(rng) * (beta + i);
    if (u >= i) {
      labels.push_back(static_cast<int>(counts.size()));
      counts.push_back(1);
      continue;
    }
    double acc = 0.0;
    int chosen = static_cast<int>(counts.size()) - 1;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      acc += counts[k];
      if (u < acc) {
        chosen = static_cast<int>(k);
        break;
      }
    }
    labels.push_back(chosen);
    ++counts[static_cast<std::size_t>(chosen)];
  }
  return labels;
}

inline Partition sample_partition(int n, double beta, Rng& rng) {
  const std::vector<int> labels = sample_assignments(n, beta, rng);
  return Partition::from_labels(labels);
}

/// E[K | β, n] = Σ_{j=0}^{n-1} β/(β+j).
inline double expected_k(double beta, int n) {
  detail::require_beta(beta);
  if (n < 1) throw std::domain_error("expected_k: n must be >= 1");
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += beta / (beta + j);
  return s;
}

/// Var[K | β, n] = Σ_{j=0}^{n-1} βj/(β+j)².
inline double variance_k(double beta, int n) {
  detail::require_beta(beta);
  if (n < 1) throw std::domain_error("variance_k: n must be >= 1");
  double s = 0.0;
  for (int j = 1; j < n; ++j) s += beta * j / ((beta + j) * (beta + j));
  return s;
}

/// ln Pr(K = k | β, n) = ln|s(n,k)| + k ln β - ln[Γ(β+n)/Γ(β)].
inline double log_prob_k(int n, int k, double beta) {
  detail::require_beta(beta);
  if (n < 1 || k < 1 || k > n) {
    throw std::domain_error("log_prob_k: need 1 <= k <= n, got n=" + std::to_string(n) + " k=" + std::to_string(k));
  }
  return cached_stirling_row(n).log_at(k) + k * std::log(beta) - log_rising_factorial(beta, n);
}

/// Fisher information of the MED for β: (1/β) Σ_{j=1}^{n-1} j/(β+j)².
inline double fisher_information(double beta, int n) {
  detail::require_beta(beta);
  double s = 0.0;
  for (int j = 1; j < n; ++j) s += j / ((beta + j) * (beta + j));
  return s / beta;
}

}  // namespace ewens
