// Apache License, Version 2.0, refer to LICENSE.txt
//
// Brute-force reference computations used only by the test suites. Nothing here shares code with
// the library beyond the C++ standard library and Boost.Math.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace oracle {

/// Number of permutations of {0..n-1} with exactly k cycles, k = 0..n, by enumeration.
inline std::vector<long long> permutation_cycle_counts(int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<long long> counts(static_cast<std::size_t>(n) + 1, 0);
  do {
    std::vector<bool> seen(perm.size(), false);
    int cycles = 0;
    for (int i = 0; i < n; ++i) {
      if (seen[static_cast<std::size_t>(i)]) continue;
      ++cycles;
      for (int j = i; !seen[static_cast<std::size_t>(j)]; j = perm[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = true;
      }
    }
    ++counts[static_cast<std::size_t>(cycles)];
  } while (std::next_permutation(perm.begin(), perm.end()));
  return counts;
}

/// All set partitions of {0..n-1} as restricted-growth label vectors.
inline std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      out.push_back(labels);
      return;
    }
    for (int l = 0; l <= used; ++l) {
      labels[static_cast<std::size_t>(i)] = l;
      rec(i + 1, std::max(used, l + 1));
    }
  };
  if (n == 0) return {{}};
  rec(0, 0);
  return out;
}

/// Relabels clusters in order of first appearance.
inline std::vector<int> restricted_growth(const std::vector<int>& labels) {
  std::map<int, int> seen;
  std::vector<int> out;
  for (int l : labels) {
    auto it = seen.find(l);
    if (it == seen.end()) it = seen.emplace(l, static_cast<int>(seen.size())).first;
    out.push_back(it->second);
  }
  return out;
}

/// Block sizes of a restricted-growth label vector, sorted descending.
inline std::vector<int> block_sizes(const std::vector<int>& labels) {
  std::map<int, int> counts;
  for (int l : labels) ++counts[l];
  std::vector<int> sizes;
  for (auto [l, c] : counts) sizes.push_back(c);
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

/// Unnormalized Jeffreys density written out directly.
inline double jeffreys_unnorm(double beta, int n) {
  double s = 0.0;
  for (int j = 1; j < n; ++j) s += j / ((beta + j) * (beta + j));
  return std::sqrt(s / beta);
}

/// ∫_0^∞ f(β) dβ by the midpoint rule after β = c·tan²(φ), which makes the Jeffreys integrand
/// bounded at both ends.
inline double tan_square_midpoint(const std::function<double(double)>& f, double c, int points) {
  const double h = (M_PI / 2.0) / points;
  double sum = 0.0;
  for (int i = 0; i < points; ++i) {
    const double phi = (i + 0.5) * h;
    const double t = std::tan(phi);
    const double beta = c * t * t;
    const double jac = 2.0 * c * t / (std::cos(phi) * std::cos(phi));
    sum += f(beta) * jac;
  }
  return sum * h;
}

/// ∫_0^∞ f by Boost's exp-sinh rule.
inline double boost_half_line(const std::function<double(double)>& f, double tol = 1e-12) {
  boost::math::quadrature::exp_sinh<double> rule;
  return rule.integrate(f, tol);
}

/// ln[Γ(β)/Γ(β+n)] as a direct sum.
inline double log_rising_inverse(double beta, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s -= std::log(beta + i);
  return s;
}

/// β^k Γ(β)/Γ(β+n) · w(β), evaluated in logs; zero at β = 0.
template <class LogW>
double a_integrand(double beta, int n, double k, const LogW& log_w) {
  if (!(beta > 0.0)) return 0.0;
  return std::exp(k * std::log(beta) + log_rising_inverse(beta, n) + log_w(beta));
}

}  // namespace oracle
