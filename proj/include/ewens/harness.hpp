// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ewens/dpmm.hpp"
#include "ewens/jeffreys_prior.hpp"
#include "ewens/med.hpp"
#include "ewens/posterior.hpp"

namespace ewens {

inline constexpr const char* kToolVersion = "1.0.0";

/// splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the RNG stream for one replicate; depends only on (master, index).
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index, std::uint64_t salt = 0) {
  return mix_seed(mix_seed(master) ^ mix_seed(index * 0x100000001b3ULL + salt));
}

/// Reals are written with 17 significant digits.
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Comma-separated table with a header row and LF endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw std::logic_error("CsvTable: row width differs from header");
    rows_.push_back(std::move(cells));
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  /// Array of objects; numeric-looking cells become numbers.
  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows_) {
      nlohmann::json obj = nlohmann::json::object();
      for (std::size_t i = 0; i < r.size(); ++i) {
        char* end = nullptr;
        const double v = std::strtod(r[i].c_str(), &end);
        if (!r[i].empty() && end && *end == '\0') {
          obj[header_[i]] = v;
        } else {
          obj[header_[i]] = r[i];
        }
      }
      arr.push_back(std::move(obj));
    }
    return arr;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> parameters;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  double wall_time_s = 0.0;

  nlohmann::json to_json() const {
    return {{"command", command},
            {"parameters", parameters},
            {"seed", seed},
            {"tool_version", tool_version},
            {"wall_time_s", wall_time_s}};
  }
};

// ---------------------------------------------------------------------------------------------
// Prior summaries

/// Normalized density on a log-spaced grid of `points` values in [lo, hi].
inline CsvTable prior_density_grid(int n, double lo = 1e-3, double hi = 1e3, int points = 200) {
  const JeffreysPrior& prior = cached_jeffreys_prior(n);
  CsvTable t({"beta", "density"});
  for (int i = 0; i < points; ++i) {
    const double beta = lo * std::pow(hi / lo, points == 1 ? 0.0 : static_cast<double>(i) / (points - 1));
    t.add_row({format_real(beta), format_real(prior.density(beta))});
  }
  return t;
}

inline CsvTable prior_k_distribution_table(int n) {
  const std::vector<double> pmf = prior_k_pmf(n);
  CsvTable t({"k", "probability"});
  for (int k = 1; k <= n; ++k) t.add_row({std::to_string(k), format_real(pmf[static_cast<std::size_t>(k - 1)])});
  return t;
}

/// Scalar prior summaries for one n, as key/value rows. `what` selects: const, median, kmoments, eta, all.
inline CsvTable prior_scalar_summary(int n, const std::string& what) {
  const JeffreysPrior& prior = cached_jeffreys_prior(n);
  CsvTable t({"n", "quantity", "value"});
  auto add = [&](const std::string& q, double v) { t.add_row({std::to_string(n), q, format_real(v)}); };
  const bool all = what == "all";
  if (all || what == "const") {
    add("normalizing_constant", prior.normalizing_constant());
    add("normalizing_constant_bound", normalizing_constant_bound(n));
  }
  if (all || what == "median") add("median", prior.median());
  if (all || what == "kmoments") {
    add("k_mean", prior.prior_k_mean());
    add("k_sd", std::sqrt(prior.prior_k_var()));
  }
  if (all || what == "eta") {
    const DiscoveryMoments d = prior.discovery_moments();
    add("eta_mean", d.mean);
    add("eta_var", d.variance);
  }
  if (t.rows().empty()) throw std::invalid_argument("prior summary: unknown selector '" + what + "'");
  return t;
}

// ---------------------------------------------------------------------------------------------
// Coverage study

enum class FitMethod { quadrature, mcmc };

struct CoverageSpec {
  double beta_true = 1.0;
  int n = 100;
  std::vector<double> levels{0.90, 0.95};
  int replicates = 200;
  PriorSpec prior = JeffreysSpec{100};
  FitMethod method = FitMethod::quadrature;
  std::uint64_t seed = 1;
  int jobs = 1;
  // MCMC settings when method == mcmc; proposal_sd <= 0 selects the default for n.
  int mcmc_iterations = 100000;
  int mcmc_burn_in = 5000;
  double proposal_sd = 0.0;
};

struct CoverageResult {
  double beta_true = 0.0;
  int n = 0;
  double level = 0.0;
  PriorSpec prior;
  int replicates = 0;
  int covered = 0;
  int failures = 0;
  double coverage = 0.0;
  double mean_width = 0.0;
  double sd_width = 0.0;
};

struct ReplicateOutcome {
  int k = 0;
  bool failed = false;
  std::vector<Interval> intervals;  // one per level
};

/// One coverage replicate: draw a partition under β_true, take K, fit, report one interval per level.
inline ReplicateOutcome coverage_replicate(const CoverageSpec& spec, int index) {
  ReplicateOutcome out;
  Rng rng(stream_seed(spec.seed, static_cast<std::uint64_t>(index)));
  const Partition data = sample_partition(spec.n, spec.beta_true, rng);
  out.k = data.num_clusters();
  try {
    if (spec.method == FitMethod::quadrature) {
      const KPosterior post(spec.n, out.k, spec.prior);
      for (double level : spec.levels) out.intervals.push_back(post.interval(level));
    } else {
      MCMCConfig cfg;
      cfg.iterations = spec.mcmc_iterations;
      cfg.burn_in = spec.mcmc_burn_in;
      cfg.proposal_sd = spec.proposal_sd > 0.0 ? spec.proposal_sd : default_proposal_sd(spec.n);
      cfg.seed = stream_seed(spec.seed, static_cast<std::uint64_t>(index), 1);
      const Chain chain = sample_posterior(spec.n, out.k, spec.prior, cfg);
      for (double level : spec.levels) out.intervals.push_back(credible_interval(chain, level));
    }
  } catch (const std::exception&) {
    out.failed = true;
    out.intervals.clear();
  }
  return out;
}

/// Runs all replicates (optionally on several threads) and reduces them in replicate order.
inline std::vector<CoverageResult> run_coverage(const CoverageSpec& spec) {
  if (spec.replicates < 1) throw std::invalid_argument("coverage: replicates must be >= 1");
  if (spec.levels.empty()) throw std::invalid_argument("coverage: no credible levels");
  for (double level : spec.levels) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("coverage: levels must lie in (0,1)");
  }
  validate_prior(spec.prior);
  if (const auto* j = std::get_if<JeffreysSpec>(&spec.prior); j && j->n != spec.n) {
    throw std::invalid_argument("coverage: Jeffreys prior index must equal the sample size");
  }
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(spec.replicates));
  const int jobs = std::max(1, std::min(spec.jobs, spec.replicates));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < spec.replicates; i = next++) outcomes[static_cast<std::size_t>(i)] = coverage_replicate(spec, i);
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<CoverageResult> results;
  for (std::size_t li = 0; li < spec.levels.size(); ++li) {
    CoverageResult r;
    r.beta_true = spec.beta_true;
    r.n = spec.n;
    r.level = spec.levels[li];
    r.prior = spec.prior;
    r.replicates = spec.replicates;
    std::vector<double> widths;
    for (const auto& o : outcomes) {
      if (o.failed) {
        ++r.failures;
        continue;
      }
      const Interval& iv = o.intervals[li];
      if (iv.contains(spec.beta_true)) ++r.covered;
      widths.push_back(iv.width());
    }
    r.coverage = static_cast<double>(r.covered) / static_cast<double>(r.replicates);
    if (!widths.empty()) {
      r.mean_width = sample_mean(widths);
      double ss = 0.0;
      for (double w : widths) ss += (w - r.mean_width) * (w - r.mean_width);
      r.sd_width = widths.size() > 1 ? std::sqrt(ss / (static_cast<double>(widths.size()) - 1.0)) : 0.0;
    }
    results.push_back(r);
  }
  return results;
}

inline CsvTable coverage_table(const std::vector<CoverageResult>& results) {
  CsvTable t({"beta_true", "n", "level", "prior", "replicates", "covered", "failures", "coverage", "mean_width",
              "sd_width"});
  for (const auto& r : results) {
    t.add_row({format_real(r.beta_true), std::to_string(r.n), format_real(r.level), prior_name(r.prior),
               std::to_string(r.replicates), std::to_string(r.covered), std::to_string(r.failures),
               format_real(r.coverage), format_real(r.mean_width), format_real(r.sd_width)});
  }
  return t;
}

// ---------------------------------------------------------------------------------------------
// DPMM data

class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One non-negative integer per line, or a single-column CSV whose header is `y`. Blank lines are skipped.
inline std::vector<long> parse_counts(std::istream& in) {
  std::vector<long> ys;
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t");
    const std::string cell = line.substr(b, e - b + 1);
    if (first_content) {
      first_content = false;
      if (cell == "y") continue;
    }
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != cell.size() || cell.empty()) {
      throw DataFormatError("line " + std::to_string(line_no) + ": expected a non-negative integer, got '" + cell + "'");
    }
    if (v < 0) throw DataFormatError("line " + std::to_string(line_no) + ": negative count " + cell);
    ys.push_back(v);
  }
  return ys;
}

inline std::vector<long> read_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataFormatError("cannot open data file '" + path + "'");
  return parse_counts(in);
}

/// Negative binomial with the given mean and variance (variance > mean), via size r and success p.
inline std::vector<long> simulate_negative_binomial(int n, double mean, double variance, std::uint64_t seed) {
  if (!(variance > mean) || !(mean > 0.0)) throw std::invalid_argument("negative binomial needs variance > mean > 0");
  const double r = mean * mean / (variance - mean);
  const double p = r / (r + mean);
  Rng rng(seed);
  std::vector<long> ys(static_cast<std::size_t>(n));
  // Poisson-Gamma mixture form so that non-integer r works too.
  std::gamma_distribution<double> rate_draw(r, (1.0 - p) / p);
  for (auto& y : ys) y = std::poisson_distribution<long>(rate_draw(rng))(rng);
  return ys;
}

inline std::vector<long> simulate_poisson(int n, double mean, std::uint64_t seed) {
  Rng rng(seed);
  std::poisson_distribution<long> draw(mean);
  std::vector<long> ys(static_cast<std::size_t>(n));
  for (auto& y : ys) y = draw(rng);
  return ys;
}

inline CsvTable posterior_k_table(const std::vector<double>& pmf) {
  CsvTable t({"k", "probability"});
  for (std::size_t i = 0; i < pmf.size(); ++i) t.add_row({std::to_string(i + 1), format_real(pmf[i])});
  return t;
}

inline double pmf_mean(const std::vector<double>& pmf) {
  double m = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) m += static_cast<double>(i + 1) * pmf[i];
  return m;
}

}  // namespace ewens
