// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ewens {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

namespace detail {

inline void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error(std::string(what) + ": argument must be positive and finite, got " +
                            std::to_string(x));
  }
}

}  // namespace detail

/// Natural log of the gamma function for x > 0.
inline double log_gamma(double x) {
  detail::require_positive(x, "log_gamma");
  return std::lgamma(x);
}

/// Digamma ψ(x), x > 0. Upward recurrence until x >= 8, then the asymptotic series.
inline double digamma(double x) {
  detail::require_positive(x, "digamma");
  double acc = 0.0;
  while (x < 8.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli terms B_{2k}/(2k x^{2k}), k = 1..6
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))));
  return acc + std::log(x) - 0.5 * inv - series;
}

/// Trigamma ψ'(x), x > 0.
inline double trigamma(double x) {
  detail::require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < 8.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 + inv * (0.5 + inv * (1.0 / 6 -
                                       inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * 5.0 / 66))))));
  return acc + series;
}

/// ln[Γ(x+n)/Γ(x)] for x > 0, n >= 0 without the cancellation of two large lgamma values.
inline double log_rising_factorial(double x, int n) {
  detail::require_positive(x, "log_rising_factorial");
  if (n < 0) throw std::domain_error("log_rising_factorial: n must be non-negative");
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += std::log(x + j);
    return s;
  }
  if (x < 10.0) return std::lgamma(x + n) - std::lgamma(x);
  // Stirling series: lnΓ(z) = (z-1/2)ln z - z + ln(2π)/2 + S(z)
  auto tail = [](double z) {
    const double inv = 1.0 / z;
    const double inv2 = inv * inv;
    return inv * (1.0 / 12 - inv2 * (1.0 / 360 - inv2 * (1.0 / 1260 - inv2 * (1.0 / 1680))));
  };
  const double dn = n;
  return (x - 0.5) * std::log1p(dn / x) + dn * std::log(x + dn) - dn + tail(x + dn) - tail(x);
}

/// ln[Γ(β+n)/Γ(β)] at β = e^θ, valid for θ below the double range of β.
inline double log_rising_factorial_at_log(double theta, int n) {
  if (n < 0) throw std::domain_error("log_rising_factorial_at_log: n must be non-negative");
  if (n == 0) return 0.0;
  // Γ(β+n)/Γ(β) = β Γ(n) (1 + O(β)) as β -> 0
  if (theta < -40.0) return theta + std::lgamma(static_cast<double>(n));
  return log_rising_factorial(std::exp(theta), n);
}

/// log(exp(a) + exp(b)) with -inf handled.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double mx = *std::max_element(values.begin(), values.end());
  if (mx == kNegInf) return kNegInf;
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

/// One row of unsigned Stirling numbers of the first kind, log |s(n,k)| for k = 1..n.
struct StirlingTable {
  int n = 0;
  std::vector<double> log_values;  // entry k-1 holds log|s(n,k)|

  double log_at(int k) const {
    if (k < 1 || k > n) return kNegInf;
    return log_values[static_cast<std::size_t>(k - 1)];
  }
};

inline constexpr int kDefaultStirlingMax = 5000;

/// Builds row n with |s(m+1,k)| = m|s(m,k)| + |s(m,k-1)| carried out in log space.
inline StirlingTable stirling_log_row(int n, int max_n = kDefaultStirlingMax) {
  if (n < 1) throw std::domain_error("stirling_log_row: n must be >= 1");
  if (n > max_n) {
    throw std::out_of_range("stirling_log_row: n=" + std::to_string(n) + " exceeds configured max " +
                            std::to_string(max_n));
  }
  // row[k] for k = 0..m; row[0] = log 0 once m >= 1.
  std::vector<double> row(static_cast<std::size_t>(n) + 1, kNegInf);
  row[1] = 0.0;  // |s(1,1)| = 1
  for (int m = 1; m < n; ++m) {
    const double log_m = std::log(static_cast<double>(m));
    for (int k = m + 1; k >= 1; --k) {
      const double stay = row[k] == kNegInf ? kNegInf : row[k] + log_m;
      row[k] = log_add_exp(stay, row[k - 1]);
    }
  }
  StirlingTable table;
  table.n = n;
  table.log_values.assign(row.begin() + 1, row.end());
  return table;
}

/// Process-wide memo of Stirling rows. Rows are immutable once inserted.
inline const StirlingTable& cached_stirling_row(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const StirlingTable>> rows;
  std::lock_guard lock(mutex);
  auto it = rows.find(n);
  if (it == rows.end()) {
    it = rows.emplace(n, std::make_unique<const StirlingTable>(stirling_log_row(n))).first;
  }
  return *it->second;
}

}  // namespace ewens
