// Apache License, Version 2.0, refer to LICENSE.txt

// Command-line front end: prior-summary, posterior, coverage, dpmm.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ewens/ewens.hpp"

namespace {

using nlohmann::json;
using namespace ewens;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::uint64_t seed = 1;
  std::string out;
  std::string format;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOptions& opts, const std::string& default_format) {
  opts.format = default_format;
  cmd->add_option("--seed", opts.seed, "RNG seed (default: $EWENS_SEED or 1)");
  cmd->add_option("--out", opts.out, "Output path (default: stdout)");
  cmd->add_option("--format", opts.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--jobs", opts.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

std::uint64_t default_seed() {
  const char* env = std::getenv("EWENS_SEED");
  if (!env || !*env) return 1;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("EWENS_SEED is not an unsigned integer: '") + env + "'");
  }
}

PriorSpec make_prior(const std::string& name, int n, double a, double b) {
  if (name == "jeffreys") return JeffreysSpec{n};
  if (name == "gamma") return GammaSpec{a, b};
  throw UsageError("unknown prior '" + name + "'");
}

/// Writes the body and, for CSV, the manifest next to it (or to stderr when writing to stdout).
void emit(const CommonOptions& opts, RunManifest manifest, const CsvTable& table, json extra,
          std::chrono::steady_clock::time_point started) {
  manifest.seed = opts.seed;
  manifest.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::string body;
  if (opts.format == "json") {
    json doc = std::move(extra);
    doc["manifest"] = manifest.to_json();
    doc["rows"] = table.to_json();
    body = doc.dump(2) + "\n";
  } else {
    body = table.str();
  }
  if (opts.out.empty()) {
    std::cout << body;
    if (opts.format == "csv") std::cerr << manifest.to_json().dump() << "\n";
    return;
  }
  std::ofstream file(opts.out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write '" + opts.out + "'");
  file << body;
  if (opts.format == "csv") {
    std::ofstream side(opts.out + ".manifest.json", std::ios::binary);
    side << manifest.to_json().dump(2) << "\n";
  }
}

// --- prior-summary -------------------------------------------------------------------------------

struct PriorSummaryOptions {
  CommonOptions common;
  int n = 0;
  std::string what = "all";
  double grid_lo = 1e-3;
  double grid_hi = 1e3;
  int grid_points = 200;
};

void run_prior_summary(const PriorSummaryOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  if (o.n < 2) throw UsageError("--n must be >= 2");
  CsvTable table = [&] {
    if (o.what == "density") return prior_density_grid(o.n, o.grid_lo, o.grid_hi, o.grid_points);
    if (o.what == "kdist") return prior_k_distribution_table(o.n);
    return prior_scalar_summary(o.n, o.what);
  }();
  RunManifest m;
  m.command = "prior-summary";
  m.parameters = {{"n", std::to_string(o.n)}, {"what", o.what}};
  if (o.what == "density") {
    m.parameters["grid_lo"] = format_real(o.grid_lo);
    m.parameters["grid_hi"] = format_real(o.grid_hi);
    m.parameters["grid_points"] = std::to_string(o.grid_points);
  }
  emit(o.common, m, table, json::object(), started);
}

// --- posterior -----------------------------------------------------------------------------------

struct PosteriorOptions {
  CommonOptions common;
  int n = 0;
  int k = 0;
  std::string prior = "jeffreys";
  double a = 0.001;
  double b = 0.001;
  std::string method = "quadrature";
  double level = 0.95;
  int iterations = 100000;
  int burn_in = 5000;
  double proposal_sd = 0.0;
};

void run_posterior(const PosteriorOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  if (o.n < 1 || o.k < 1 || o.k > o.n) throw UsageError("need 1 <= k <= n");
  if (o.prior == "jeffreys" && o.n < 2) throw UsageError("the Jeffreys prior needs n >= 2");
  const PriorSpec prior = make_prior(o.prior, o.n, o.a, o.b);
  PosteriorSummary s;
  std::vector<std::string> warnings;
  if (o.method == "quadrature") {
    s = quadrature_posterior_summary(o.n, o.k, prior, o.level);
  } else {
    MCMCConfig cfg;
    cfg.iterations = o.iterations;
    cfg.burn_in = o.burn_in;
    cfg.proposal_sd = o.proposal_sd > 0.0 ? o.proposal_sd : default_proposal_sd(o.n);
    cfg.seed = o.common.seed;
    const Chain chain = sample_posterior(o.n, o.k, prior, cfg);
    warnings = chain.warnings;
    s = chain_posterior_summary(chain, o.n, o.level);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  CsvTable table({"quantity", "value"});
  auto add = [&](const std::string& q, double v) { table.add_row({q, format_real(v)}); };
  add("beta_mean", s.beta_mean);
  add("beta_lo", s.beta_interval.lo);
  add("beta_hi", s.beta_interval.hi);
  add("eta_mean", s.eta_mean);
  add("eta_lo", s.eta_interval.lo);
  add("eta_hi", s.eta_interval.hi);
  if (s.beta_mean_se) add("beta_mean_se", *s.beta_mean_se);
  if (s.acceptance_rate) add("acceptance_rate", *s.acceptance_rate);

  json extra = {{"level", s.level},
                {"prior", prior_name(prior)},
                {"method", o.method},
                {"beta", {{"mean", s.beta_mean}, {"ci", {s.beta_interval.lo, s.beta_interval.hi}}}},
                {"eta", {{"mean", s.eta_mean}, {"ci", {s.eta_interval.lo, s.eta_interval.hi}}}},
                {"warnings", warnings}};
  if (s.beta_mean_se) extra["beta"]["mean_se"] = *s.beta_mean_se;
  if (s.acceptance_rate) extra["acceptance_rate"] = *s.acceptance_rate;

  RunManifest m;
  m.command = "posterior";
  m.parameters = {{"n", std::to_string(o.n)},          {"k", std::to_string(o.k)},
                  {"prior", prior_name(prior)},         {"method", o.method},
                  {"level", format_real(o.level)}};
  if (o.method == "mcmc") {
    m.parameters["iterations"] = std::to_string(o.iterations);
    m.parameters["burn_in"] = std::to_string(o.burn_in);
    m.parameters["proposal_sd"] = format_real(o.proposal_sd > 0.0 ? o.proposal_sd : default_proposal_sd(o.n));
  }
  emit(o.common, m, table, extra, started);
}

// --- coverage ------------------------------------------------------------------------------------

struct CoverageOptions {
  CommonOptions common;
  double beta_true = 1.0;
  int n = 100;
  std::vector<double> levels{0.90, 0.95};
  int replicates = 200;
  std::string prior = "both";
  double a = 0.001;
  double b = 0.001;
  std::string method = "quadrature";
  int iterations = 100000;
  int burn_in = 5000;
  double proposal_sd = 0.0;
};

void run_coverage_cmd(const CoverageOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  if (o.replicates < 50) throw UsageError("--replicates must be >= 50");
  if (o.n < 2) throw UsageError("--n must be >= 2");
  std::vector<PriorSpec> priors;
  if (o.prior == "both" || o.prior == "jeffreys") priors.emplace_back(JeffreysSpec{o.n});
  if (o.prior == "both" || o.prior == "gamma") priors.emplace_back(GammaSpec{o.a, o.b});
  if (priors.empty()) throw UsageError("unknown prior '" + o.prior + "'");

  std::vector<CoverageResult> all;
  for (const auto& prior : priors) {
    CoverageSpec spec;
    spec.beta_true = o.beta_true;
    spec.n = o.n;
    spec.levels = o.levels;
    spec.replicates = o.replicates;
    spec.prior = prior;
    spec.method = o.method == "mcmc" ? FitMethod::mcmc : FitMethod::quadrature;
    spec.seed = o.common.seed;
    spec.jobs = o.common.jobs;
    spec.mcmc_iterations = o.iterations;
    spec.mcmc_burn_in = o.burn_in;
    spec.proposal_sd = o.proposal_sd;
    auto rows = run_coverage(spec);
    all.insert(all.end(), rows.begin(), rows.end());
  }
  for (const auto& r : all) {
    if (r.failures > 0) std::cerr << "warning: " << r.failures << " replicate fits failed for " << prior_name(r.prior) << "\n";
  }
  std::string levels;
  for (double l : o.levels) levels += (levels.empty() ? "" : ",") + format_real(l);
  RunManifest m;
  m.command = "coverage";
  m.parameters = {{"beta_true", format_real(o.beta_true)}, {"n", std::to_string(o.n)},
                  {"levels", levels},                      {"replicates", std::to_string(o.replicates)},
                  {"prior", o.prior},                      {"a", format_real(o.a)},
                  {"b", format_real(o.b)},                 {"method", o.method}};
  emit(o.common, m, coverage_table(all), json::object(), started);
}

// --- dpmm ----------------------------------------------------------------------------------------

struct DpmmOptions {
  CommonOptions common;
  std::string data;
  std::string simulate;
  int sim_n = 50;
  double sim_mean = 20.0;
  double sim_var = 220.0;
  double base_shape = 2.0;
  double base_rate = 0.1;
  std::string prior = "jeffreys";
  double a = 0.001;
  double b = 0.001;
  int burn_in = 2000;
  int sweeps = 10000;
};

void run_dpmm_cmd(const DpmmOptions& o) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<long> ys;
  std::string source;
  if (!o.data.empty()) {
    try {
      ys = read_counts(o.data);
    } catch (const DataFormatError& e) {
      throw UsageError(o.data + ": " + e.what());
    }
    source = o.data;
  } else if (o.simulate == "negbin") {
    ys = simulate_negative_binomial(o.sim_n, o.sim_mean, o.sim_var, stream_seed(o.common.seed, 0, 7));
    source = "simulated negbin";
  } else if (o.simulate == "poisson") {
    ys = simulate_poisson(o.sim_n, o.sim_mean, stream_seed(o.common.seed, 0, 7));
    source = "simulated poisson";
  } else {
    throw UsageError("provide --data <path> or --simulate negbin|poisson");
  }
  if (ys.empty()) throw UsageError("no observations in data");
  if (o.prior == "jeffreys" && ys.size() < 2) throw UsageError("the Jeffreys prior needs at least 2 observations");

  const int n = static_cast<int>(ys.size());
  const PriorSpec prior = make_prior(o.prior, n, o.a, o.b);
  const PoissonGammaBase base{o.base_shape, o.base_rate};
  base.validate();
  DpmmRunConfig cfg;
  cfg.burn_in = o.burn_in;
  cfg.sweeps = o.sweeps;
  cfg.seed = o.common.seed;
  const DpmmRun run = run_dpmm(ys, base, prior, cfg);
  const std::vector<double> pmf = posterior_k_distribution(run.k_trace, n);

  RunManifest m;
  m.command = "dpmm";
  m.parameters = {{"data", source},
                  {"n", std::to_string(n)},
                  {"base_shape", format_real(o.base_shape)},
                  {"base_rate", format_real(o.base_rate)},
                  {"prior", prior_name(prior)},
                  {"burn_in", std::to_string(o.burn_in)},
                  {"sweeps", std::to_string(o.sweeps)}};
  if (!o.simulate.empty() && o.data.empty()) {
    m.parameters["sim_n"] = std::to_string(o.sim_n);
    m.parameters["sim_mean"] = format_real(o.sim_mean);
    if (o.simulate == "negbin") m.parameters["sim_var"] = format_real(o.sim_var);
  }
  json extra = {{"n", n}, {"prior", prior_name(prior)}, {"posterior_mean_k", pmf_mean(pmf)}};
  emit(o.common, m, posterior_k_table(pmf), extra, started);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Default Bayesian inference for the Ewens concentration parameter"};
  app.require_subcommand(1);

  PriorSummaryOptions ps;
  auto* ps_cmd = app.add_subcommand("prior-summary", "Summaries of the Jeffreys prior for a sample size n");
  add_common(ps_cmd, ps.common, "csv");
  ps_cmd->add_option("--n", ps.n, "Sample size")->required();
  ps_cmd->add_option("--what", ps.what, "Series to emit")
      ->check(CLI::IsMember({"density", "const", "median", "kmoments", "kdist", "eta", "all"}));
  ps_cmd->add_option("--grid-lo", ps.grid_lo, "Smallest beta of the density grid")->check(CLI::PositiveNumber);
  ps_cmd->add_option("--grid-hi", ps.grid_hi, "Largest beta of the density grid")->check(CLI::PositiveNumber);
  ps_cmd->add_option("--grid-points", ps.grid_points, "Density grid size")->check(CLI::PositiveNumber);

  PosteriorOptions po;
  auto* po_cmd = app.add_subcommand("posterior", "Posterior of beta given n and the number of clusters k");
  add_common(po_cmd, po.common, "json");
  po_cmd->add_option("--n", po.n, "Sample size")->required();
  po_cmd->add_option("--k", po.k, "Observed number of clusters")->required();
  po_cmd->add_option("--prior", po.prior, "Prior on beta")->check(CLI::IsMember({"jeffreys", "gamma"}));
  po_cmd->add_option("--a", po.a, "Gamma prior shape")->check(CLI::PositiveNumber);
  po_cmd->add_option("--b", po.b, "Gamma prior rate")->check(CLI::PositiveNumber);
  po_cmd->add_option("--method", po.method, "Fitting method")->check(CLI::IsMember({"quadrature", "mcmc"}));
  po_cmd->add_option("--level", po.level, "Credible level")->check(CLI::Range(0.0, 1.0));
  po_cmd->add_option("--iterations", po.iterations, "Retained MCMC draws")->check(CLI::PositiveNumber);
  po_cmd->add_option("--burn-in", po.burn_in, "MCMC burn-in")->check(CLI::NonNegativeNumber);
  po_cmd->add_option("--proposal-sd", po.proposal_sd, "Random-walk sd on log beta (default by n)");

  CoverageOptions co;
  auto* co_cmd = app.add_subcommand("coverage", "Frequentist coverage of equal-tail credible intervals");
  add_common(co_cmd, co.common, "csv");
  co_cmd->add_option("--beta-true", co.beta_true, "Data-generating beta")->check(CLI::PositiveNumber);
  co_cmd->add_option("--n", co.n, "Sample size");
  co_cmd->add_option("--levels", co.levels, "Credible levels")->delimiter(',');
  co_cmd->add_option("--replicates", co.replicates, "Number of simulated datasets");
  co_cmd->add_option("--prior", co.prior, "Prior arm(s)")->check(CLI::IsMember({"jeffreys", "gamma", "both"}));
  co_cmd->add_option("--a", co.a, "Gamma prior shape")->check(CLI::PositiveNumber);
  co_cmd->add_option("--b", co.b, "Gamma prior rate")->check(CLI::PositiveNumber);
  co_cmd->add_option("--method", co.method, "Fitting method")->check(CLI::IsMember({"quadrature", "mcmc"}));
  co_cmd->add_option("--iterations", co.iterations, "Retained MCMC draws")->check(CLI::PositiveNumber);
  co_cmd->add_option("--burn-in", co.burn_in, "MCMC burn-in")->check(CLI::NonNegativeNumber);
  co_cmd->add_option("--proposal-sd", co.proposal_sd, "Random-walk sd on log beta (default by n)");

  DpmmOptions dp;
  auto* dp_cmd = app.add_subcommand("dpmm", "Dirichlet-process mixture of Poisson kernels");
  add_common(dp_cmd, dp.common, "csv");
  dp_cmd->add_option("--data", dp.data, "Counts, one per line or a CSV column headed y");
  dp_cmd->add_option("--simulate", dp.simulate, "Simulate data instead")->check(CLI::IsMember({"negbin", "poisson"}));
  dp_cmd->add_option("--sim-n", dp.sim_n, "Simulated sample size")->check(CLI::PositiveNumber);
  dp_cmd->add_option("--sim-mean", dp.sim_mean, "Simulated mean")->check(CLI::PositiveNumber);
  dp_cmd->add_option("--sim-var", dp.sim_var, "Simulated variance (negbin)")->check(CLI::PositiveNumber);
  dp_cmd->add_option("--base-shape", dp.base_shape, "Base measure shape")->check(CLI::PositiveNumber);
  dp_cmd->add_option("--base-rate", dp.base_rate, "Base measure rate")->check(CLI::PositiveNumber);
  dp_cmd->add_option("--prior", dp.prior, "Prior on beta")->check(CLI::IsMember({"jeffreys", "gamma"}));
  dp_cmd->add_option("--a", dp.a, "Gamma prior shape")->check(CLI::PositiveNumber);
  dp_cmd->add_option("--b", dp.b, "Gamma prior rate")->check(CLI::PositiveNumber);
  dp_cmd->add_option("--burn-in", dp.burn_in, "Burn-in sweeps")->check(CLI::NonNegativeNumber);
  dp_cmd->add_option("--sweeps", dp.sweeps, "Retained sweeps")->check(CLI::PositiveNumber);

  try {
    const std::uint64_t seed = default_seed();
    ps.common.seed = po.common.seed = co.common.seed = dp.common.seed = seed;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*ps_cmd) run_prior_summary(ps);
    if (*po_cmd) run_posterior(po);
    if (*co_cmd) run_coverage_cmd(co);
    if (*dp_cmd) run_dpmm_cmd(dp);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
