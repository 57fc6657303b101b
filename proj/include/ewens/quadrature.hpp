// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ewens/special_functions.hpp"

namespace ewens {

struct QuadratureConfig {
  double rel_tol = 1e-10;
  int max_subdivisions = 200;
  // Boundary between the u^2 piece and the 1/t^2 piece when a fixed split is requested.
  double split_point = 1.0;

  void validate() const {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("QuadratureConfig: rel_tol must be > 0");
    if (max_subdivisions < 10) throw std::invalid_argument("QuadratureConfig: max_subdivisions must be >= 10");
    if (!(split_point > 0.0)) throw std::invalid_argument("QuadratureConfig: split_point must be > 0");
  }
};

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IntegrationResult {
  double value = 0.0;
  double abs_error = 0.0;
  int subdivisions = 0;
};

namespace detail {

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

// 15-point Kronrod abscissae with the embedded 7-point Gauss rule.
template <class F>
Segment gauss_kronrod_15(F& f, double a, double b) {
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = wk[7] * fc;
  double gauss = wg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * xk[static_cast<std::size_t>(i)];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += wk[static_cast<std::size_t>(i)] * pair;
    if (i % 2 == 1) gauss += wg[static_cast<std::size_t>(i / 2)] * pair;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod on [a, b]. Always bisects the segment with the
/// largest error estimate. Throws QuadratureError when the subdivision budget runs out.
template <class F>
IntegrationResult integrate_adaptive(F&& f, double a, double b, double rel_tol, int max_subdivisions,
                                     double abs_tol = 0.0) {
  std::priority_queue<detail::Segment> heap;
  heap.push(detail::gauss_kronrod_15(f, a, b));
  double total = heap.top().value;
  double error = heap.top().error;
  int subdivisions = 0;
  for (;;) {
    if (!std::isfinite(total) || !std::isfinite(error)) {
      throw QuadratureError("integrate_adaptive: non-finite integrand on [" + std::to_string(a) + ", " +
                            std::to_string(b) + "]");
    }
    if (error <= std::max(abs_tol, rel_tol * std::abs(total))) break;
    if (subdivisions >= max_subdivisions) {
      throw QuadratureError("integrate_adaptive: subdivision limit " + std::to_string(max_subdivisions) +
                            " reached (estimate " + std::to_string(total) + ", error " + std::to_string(error) +
                            ")");
    }
    const detail::Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const detail::Segment left = detail::gauss_kronrod_15(f, worst.a, mid);
    const detail::Segment right = detail::gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++subdivisions;
    // Re-sum occasionally so the running error does not drift below round-off.
    if (subdivisions % 32 == 0) {
      auto copy = heap;
      total = 0.0;
      error = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        error += copy.top().error;
        copy.pop();
      }
    }
  }
  return {total, error, subdivisions};
}

/// Power-law behaviour of a density f(β) at the ends of (0, ∞): f ~ β^origin_exponent as β → 0
/// and f ~ β^{-tail_exponent} as β → ∞. Only used to pick substitution powers.
struct EndpointBehavior {
  double origin_exponent = -0.5;
  double tail_exponent = 1.5;

  // β = x·u^γ below a split point flattens β^p near 0 when γ = 1/(p+1).
  double origin_power() const { return origin_exponent + 1.0 > 0.0 ? std::max(2.0, 1.0 / (origin_exponent + 1.0)) : 2.0; }
  // β = x·t^{-δ} above a split point flattens β^{-r} in the tail when δ = 1/(r-1).
  double tail_power() const { return tail_exponent > 1.0 ? std::max(2.0, 1.0 / (tail_exponent - 1.0)) : 2.0; }
};

/// Location of the maximum of g(θ) = log_f(θ) + θ, i.e. where the mass of f sits on the log scale.
/// Densities are passed as θ ↦ log f(e^θ) throughout so that β below the double range stays usable.
struct LogScaleMode {
  double theta = 0.0;
  double log_value = 0.0;  // g at the mode
};

template <class LogF>
LogScaleMode locate_log_scale_mode(const LogF& log_f, double lo_theta = std::log(1e-10),
                                   double hi_theta = std::log(1e12), int grid_points = 241) {
  auto g = [&](double theta) {
    const double v = log_f(theta) + theta;
    return std::isnan(v) ? kNegInf : v;
  };
  const double step = (hi_theta - lo_theta) / (grid_points - 1);
  int best = 0;
  double best_value = kNegInf;
  for (int i = 0; i < grid_points; ++i) {
    const double v = g(lo_theta + step * i);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  if (best_value == kNegInf) throw QuadratureError("locate_log_scale_mode: integrand vanishes on the search grid");
  // Golden-section refinement inside the neighbouring grid cells.
  double a = lo_theta + step * std::max(0, best - 1);
  double b = lo_theta + step * std::min(grid_points - 1, best + 1);
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double gc = g(c);
  double gd = g(d);
  for (int it = 0; it < 80 && (b - a) > 1e-9; ++it) {
    if (gc > gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - ratio * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + ratio * (b - a);
      gd = g(d);
    }
  }
  const double theta = 0.5 * (a + b);
  const double refined = g(theta);
  if (refined >= best_value) return {theta, refined};
  return {lo_theta + step * best, best_value};
}

namespace detail {

inline double unit_weight(double) { return 1.0; }

// ∫_0^x exp(log_f - shift) w dβ with β = x·u^γ, x = e^{log_x}.
template <class LogF, class W>
double integrate_below(const LogF& log_f, const W& weight, double log_x, double shift, double gamma,
                       const QuadratureConfig& cfg) {
  const double log_gamma_x = std::log(gamma) + log_x;
  auto integrand = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double log_u = std::log(u);
    const double theta = log_x + gamma * log_u;
    const double lf = log_f(theta);
    if (lf == kNegInf) return 0.0;
    const double value = std::exp(lf - shift + log_gamma_x + (gamma - 1.0) * log_u);
    return value == 0.0 ? 0.0 : value * weight(std::exp(theta));
  };
  return integrate_adaptive(integrand, 0.0, 1.0, cfg.rel_tol, cfg.max_subdivisions).value;
}

// ∫_x^∞ exp(log_f - shift) w dβ with β = x·t^{-δ}.
template <class LogF, class W>
double integrate_above(const LogF& log_f, const W& weight, double log_x, double shift, double delta,
                       const QuadratureConfig& cfg) {
  const double log_delta_x = std::log(delta) + log_x;
  auto integrand = [&](double t) {
    if (t <= 0.0) return 0.0;
    const double log_t = std::log(t);
    const double theta = log_x - delta * log_t;
    if (theta > 700.0) return 0.0;
    const double lf = log_f(theta);
    if (lf == kNegInf) return 0.0;
    const double value = std::exp(lf - shift + log_delta_x - (delta + 1.0) * log_t);
    return value == 0.0 ? 0.0 : value * weight(std::exp(theta));
  };
  return integrate_adaptive(integrand, 0.0, 1.0, cfg.rel_tol, cfg.max_subdivisions).value;
}

}  // namespace detail

/// log ∫_0^∞ f(β) dβ for f given as θ ↦ log f(e^θ), split at β = e^{log_split}. Both halves are mapped
/// onto (0,1]: β = split·u^γ below (absorbs the origin singularity) and β = split·t^{-δ} above
/// (absorbs the power-law tail).
template <class LogF>
double log_integrate_positive(const LogF& log_f, double log_split, const QuadratureConfig& cfg,
                              EndpointBehavior ends = {}) {
  cfg.validate();
  const double shift = log_f(log_split) + log_split;
  if (!std::isfinite(shift)) throw QuadratureError("log_integrate_positive: integrand not finite at split point");
  const double lower =
      detail::integrate_below(log_f, detail::unit_weight, log_split, shift, ends.origin_power(), cfg);
  const double upper =
      detail::integrate_above(log_f, detail::unit_weight, log_split, shift, ends.tail_power(), cfg);
  const double total = lower + upper;
  if (!(total > 0.0) || !std::isfinite(total)) throw QuadratureError("log_integrate_positive: non-positive integral");
  return std::log(total) + shift;
}

/// Same, with the split placed at the log-scale mode of the integrand.
template <class LogF>
double log_integrate_positive(const LogF& log_f, const QuadratureConfig& cfg, EndpointBehavior ends = {}) {
  const LogScaleMode mode = locate_log_scale_mode(log_f);
  return log_integrate_positive(log_f, mode.theta, cfg, ends);
}

/// An unnormalized density on (0, ∞), given as θ ↦ log f(e^θ), with its normalizing constant,
/// expectations, cdf and quantiles evaluated by quadrature.
template <class LogDensity>
class PositiveLineDensity {
 public:
  PositiveLineDensity(LogDensity log_density, QuadratureConfig cfg, EndpointBehavior ends = {})
      : log_density_(std::move(log_density)), cfg_(cfg), ends_(ends) {
    cfg_.validate();
    log_split_ = locate_log_scale_mode(log_density_).theta;
    log_norm_ = log_integrate_positive(log_density_, log_split_, cfg_, ends_);
  }

  /// Uses the fixed split point from the config instead of locating the mode.
  static PositiveLineDensity with_fixed_split(LogDensity log_density, QuadratureConfig cfg,
                                              EndpointBehavior ends = {}) {
    return PositiveLineDensity(std::move(log_density), cfg, ends, std::log(cfg.split_point));
  }

  double log_norm() const { return log_norm_; }
  double split() const { return std::exp(log_split_); }
  const QuadratureConfig& config() const { return cfg_; }

  double log_pdf(double beta) const { return log_density_(std::log(beta)) - log_norm_; }
  double pdf(double beta) const { return std::exp(log_pdf(beta)); }

  /// E[g(β)] under the normalized density.
  template <class G>
  double expect(const G& g) const {
    return detail::integrate_below(log_density_, g, log_split_, log_norm_, ends_.origin_power(), cfg_) +
           detail::integrate_above(log_density_, g, log_split_, log_norm_, ends_.tail_power(), cfg_);
  }

  /// E[g(β); β <= x].
  template <class G>
  double expect_below(const G& g, double x) const {
    return detail::integrate_below(log_density_, g, std::log(x), log_norm_, ends_.origin_power(), cfg_);
  }

  /// E[g(β); β > x].
  template <class G>
  double expect_above(const G& g, double x) const {
    return detail::integrate_above(log_density_, g, std::log(x), log_norm_, ends_.tail_power(), cfg_);
  }

  double cdf(double x) const { return x > 0.0 ? cdf_log(std::log(x)) : 0.0; }
  double survival(double x) const { return x > 0.0 ? survival_log(std::log(x)) : 1.0; }

  /// cdf at β = e^θ, usable for θ far below the double range of β.
  double cdf_log(double theta) const {
    if (theta == kNegInf) return 0.0;
    if (theta <= log_split_) return std::clamp(mass_below(theta), 0.0, 1.0);
    return std::clamp(1.0 - mass_above(theta), 0.0, 1.0);
  }

  double survival_log(double theta) const {
    if (theta == kNegInf) return 1.0;
    if (theta <= log_split_) return std::clamp(1.0 - mass_below(theta), 0.0, 1.0);
    return std::clamp(mass_above(theta), 0.0, 1.0);
  }

  /// ln of the p-quantile: solves cdf(e^θ) = p by safeguarded Newton on θ. The bracket starts at
  /// [guess/16, guess·16] and widens geometrically until it contains the root.
  double log_quantile(double p, double guess = 0.0, double tol = 1e-10) const {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0,1)");
    const double start = guess > 0.0 ? std::log(guess) : log_split_;
    // Evaluate from whichever tail is smaller.
    auto h = [&](double theta) { return p < 0.5 ? cdf_log(theta) - p : (1.0 - p) - survival_log(theta); };
    double lo = start - std::log(16.0);
    double hi = start + std::log(16.0);
    double h_lo = h(lo);
    double h_hi = h(hi);
    double widen = std::log(16.0);
    for (int i = 0; i < 64 && h_lo > 0.0; ++i) {
      hi = lo;
      h_hi = h_lo;
      widen *= 2.0;
      lo -= widen;
      h_lo = h(lo);
    }
    widen = std::log(16.0);
    for (int i = 0; i < 64 && h_hi < 0.0; ++i) {
      lo = hi;
      h_lo = h_hi;
      widen *= 2.0;
      hi += widen;
      h_hi = h(hi);
    }
    if (h_lo > 0.0 || h_hi < 0.0) throw QuadratureError("quantile: failed to bracket the root");
    double theta = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
      const double value = h(theta);
      if (value == 0.0) return theta;
      if (value < 0.0) {
        lo = theta;
      } else {
        hi = theta;
      }
      const double slope = std::exp(log_density_(theta) - log_norm_ + theta);
      double next = theta - value / slope;
      if (!(slope > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
      if (std::abs(next - theta) < tol || (hi - lo) < tol) return next;
      theta = next;
    }
    throw QuadratureError("quantile: root finding did not converge");
  }

  double quantile(double p, double guess = 0.0, double tol = 1e-10) const {
    return std::exp(log_quantile(p, guess, tol));
  }

 private:
  PositiveLineDensity(LogDensity log_density, QuadratureConfig cfg, EndpointBehavior ends, double log_split)
      : log_density_(std::move(log_density)), cfg_(cfg), ends_(ends), log_split_(log_split) {
    cfg_.validate();
    log_norm_ = log_integrate_positive(log_density_, log_split_, cfg_, ends_);
  }

  double mass_below(double theta) const {
    return detail::integrate_below(log_density_, detail::unit_weight, theta, log_norm_, ends_.origin_power(), cfg_);
  }
  double mass_above(double theta) const {
    return detail::integrate_above(log_density_, detail::unit_weight, theta, log_norm_, ends_.tail_power(), cfg_);
  }

  LogDensity log_density_;
  QuadratureConfig cfg_;
  EndpointBehavior ends_;
  double log_split_ = 0.0;
  double log_norm_ = 0.0;
};

}  // namespace ewens
