// rlrt: regularized likelihood ratio tests for covariance sphericity.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlrt/commands.hpp"

namespace {

using namespace rlrt;

struct CommonOptions {
  std::vector<std::string> methods;
  std::vector<double> lambdas;
  double eta = htest::kDefaultLevel;
  std::vector<std::size_t> ns;
  std::vector<double> gammas;
  std::optional<std::size_t> p;
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  std::vector<std::string> scenarios;
  std::string beta_grid;
  std::string format = "csv";
  bool transpose = false;
  bool allow_close_spike = false;
  std::string a1_rule = "max";
  bool exit_on_reject = false;
  bool emit_data = false;
  std::size_t workers = 0;
  std::string input;
  std::string output;
};

void add_method(CLI::App& app, CommonOptions& o, bool many) {
  auto* opt = app.add_option("--method", o.methods,
                             "Test: rlrt, clrt, lw or chen; rlrt(<lambda>) pins a lambda. Repeatable.");
  if (!many) opt->expected(1);
  app.add_option("--lambda", o.lambdas, "Ridge weight lambda in (0, 1]; repeatable, one rlrt row per value (default 0.5)")
      ->check(CLI::Range(0.0, 1.0));
}

void add_eta(CLI::App& app, CommonOptions& o) {
  app.add_option("--eta", o.eta, "Significance level in (0, 1) (default 0.05)");
}

void add_reps_seed(CLI::App& app, CommonOptions& o) {
  app.add_option("--reps", o.reps, "Monte Carlo replications per cell (default 10000)");
  app.add_option("--seed", o.seed, "Master seed, unsigned 64-bit (default 0)");
  app.add_option("--workers", o.workers, "Worker threads; 0 uses every core. Never changes the output.");
}

void add_output(CLI::App& app, CommonOptions& o) {
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("-o,--output", o.output, "Write to this file instead of standard output");
}

std::size_t resolve_p(const CommonOptions& o, std::size_t n) {
  if (o.p) return *o.p;
  if (o.gammas.size() == 1) return mc::dimension_for(o.gammas.front(), n);
  throw DomainError("give --p, or exactly one --gamma so that p = round(gamma * n)");
}

std::size_t single_n(const CommonOptions& o) {
  if (o.ns.size() != 1) throw DomainError("give exactly one --n");
  return o.ns.front();
}

double single_lambda(const CommonOptions& o) {
  if (o.lambdas.size() > 1) throw DomainError("give at most one --lambda for this command");
  return o.lambdas.empty() ? 0.5 : o.lambdas.front();
}

cmd::CommandOutput dispatch(const std::string& command, const CommonOptions& o) {
  const io::Format format = io::parse_format(o.format);
  const std::vector<std::string> method_names = o.methods.empty() ? std::vector<std::string>{"rlrt"} : o.methods;

  if (command == "test") {
    cmd::TestConfig cfg;
    if (o.input.empty()) throw DomainError("test: an input file is required");
    cfg.input = o.input;
    cfg.methods = cmd::expand_methods(method_names, o.lambdas);
    cfg.eta = o.eta;
    cfg.transpose = o.transpose;
    cfg.exit_on_reject = o.exit_on_reject;
    cfg.format = format;
    return cmd::cmd_test(cfg);
  }
  if (command == "null-params") {
    cmd::NullParamsConfig cfg;
    cfg.lambda = single_lambda(o);
    cfg.n = single_n(o);
    cfg.p = resolve_p(o, cfg.n);
    cfg.format = format;
    return cmd::cmd_null_params(cfg);
  }
  if (command == "simulate" && o.emit_data) {
    cmd::EmitDataConfig cfg;
    if (o.scenarios.size() > 1) throw DomainError("simulate --emit-data takes a single --scenario");
    cfg.scenario = Scenario::parse(o.scenarios.empty() ? "null" : o.scenarios.front(), A1TwosRule::parse(o.a1_rule));
    cfg.n = single_n(o);
    cfg.p = resolve_p(o, cfg.n);
    cfg.seed = o.seed;
    return cmd::cmd_emit_data(cfg);
  }
  if (command == "simulate") {
    cmd::SimulateConfig cfg;
    cfg.grid = cmd::default_grid();
    cfg.a1_rule = A1TwosRule::parse(o.a1_rule);
    if (!o.scenarios.empty()) {
      cfg.grid.scenarios.clear();
      for (const auto& s : o.scenarios) cfg.grid.scenarios.push_back(Scenario::parse(s, cfg.a1_rule));
    }
    if (!o.ns.empty()) cfg.grid.sample_sizes = o.ns;
    if (!o.gammas.empty()) cfg.grid.gammas = o.gammas;
    if (o.p) throw DomainError("simulate sets p from --gamma; --p is only valid with --emit-data");
    if (!o.methods.empty() || !o.lambdas.empty()) cfg.grid.methods = cmd::expand_methods(method_names, o.lambdas);
    cfg.grid.reps = o.reps;
    cfg.grid.chen_reps = std::min<std::size_t>(cfg.grid.chen_reps, o.reps);
    cfg.grid.master_seed = o.seed;
    cfg.grid.eta = o.eta;
    cfg.grid.workers = o.workers;
    cfg.format = format;
    return cmd::cmd_simulate(cfg);
  }
  if (command == "power-curve") {
    cmd::PowerCurveConfig cfg;
    cfg.lambda = single_lambda(o);
    cfg.n = single_n(o);
    cfg.p = resolve_p(o, cfg.n);
    if (o.beta_grid.empty()) throw DomainError("power-curve: --beta-grid is required");
    cfg.betas = cmd::parse_beta_grid(o.beta_grid);
    cfg.reps = o.reps;
    cfg.seed = o.seed;
    cfg.eta = o.eta;
    cfg.allow_close_spike = o.allow_close_spike;
    cfg.workers = o.workers;
    cfg.format = format;
    return cmd::cmd_power_curve(cfg);
  }
  if (command == "critical-value") {
    cmd::CriticalValueConfig cfg;
    if (method_names.size() != 1) throw DomainError("critical-value takes a single --method");
    cfg.method = cmd::parse_method(method_names.front(), single_lambda(o));
    cfg.n = single_n(o);
    cfg.p = resolve_p(o, cfg.n);
    cfg.eta = o.eta;
    cfg.reps = o.reps;
    cfg.seed = o.seed;
    cfg.workers = o.workers;
    cfg.format = format;
    return cmd::cmd_critical_value(cfg);
  }
  throw DomainError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized likelihood ratio tests for sphericity of a covariance matrix", "rlrt"};
  app.set_version_flag("--version", std::string(io::kToolName) + " " + io::kToolVersion);
  app.require_subcommand(1);
  CommonOptions o;

  auto* test = app.add_subcommand("test", "Run sphericity tests on a data file (rows = observations)");
  test->add_option("input", o.input, "Delimited numeric file; header row optional")->required();
  add_method(*test, o, true);
  add_eta(*test, o);
  test->add_flag("--transpose", o.transpose, "Treat rows as variables and columns as observations");
  test->add_flag("--exit-on-reject", o.exit_on_reject, "Exit with status 2 when any selected test rejects");
  add_output(*test, o);

  auto* null_params = app.add_subcommand("null-params", "Print the null mean, variance and centering term");
  null_params->add_option("--lambda", o.lambdas, "Ridge weight lambda in (0, 1] (default 0.5)")->expected(1);
  null_params->add_option("--n", o.ns, "Sample size")->expected(1)->required();
  null_params->add_option("--p", o.p, "Dimension");
  null_params->add_option("--gamma", o.gammas, "Dimension ratio; p = round(gamma * n) when --p is absent")->expected(1);
  add_output(*null_params, o);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo sizes and powers over a scenario grid");
  add_method(*simulate, o, true);
  add_eta(*simulate, o);
  simulate->add_option("--n", o.ns, "Sample sizes (default 20 40 80)");
  simulate->add_option("--gamma", o.gammas, "Dimension ratios, p = round(gamma * n) (default 0.2 0.5 0.8)");
  simulate->add_option("--p", o.p, "Dimension of the emitted dataset (--emit-data only)");
  simulate->add_option("--scenario", o.scenarios, "null, a1, a2, a3, a4 or cs:<beta>; repeatable (default null)");
  simulate->add_option("--a1-twos-rule", o.a1_rule, "Count of variances equal to 2 under a1: max, min or fixed:k");
  simulate->add_flag("--emit-data", o.emit_data, "Write one simulated n x p dataset instead of a rate table");
  add_reps_seed(*simulate, o);
  add_output(*simulate, o);

  auto* power = app.add_subcommand("power-curve", "Analytic and empirical power against compound symmetry");
  power->add_option("--lambda", o.lambdas, "Ridge weight lambda in (0, 1] (default 0.5)")->expected(1);
  power->add_option("--n", o.ns, "Sample size")->expected(1)->required();
  power->add_option("--p", o.p, "Dimension");
  power->add_option("--gamma", o.gammas, "Dimension ratio; p = round(gamma * n) when --p is absent")->expected(1);
  power->add_option("--beta-grid", o.beta_grid, "Comma list or start:stop:step of beta values")->required();
  power->add_flag("--allow-close-spike", o.allow_close_spike,
                  "Keep beta <= sqrt(p/(n-1)) rows, flagged, instead of failing");
  add_eta(*power, o);
  add_reps_seed(*power, o);
  add_output(*power, o);

  auto* critical = app.add_subcommand("critical-value", "Empirical null quantile of the standardized statistic");
  add_method(*critical, o, false);
  critical->add_option("--n", o.ns, "Sample size")->expected(1)->required();
  critical->add_option("--p", o.p, "Dimension");
  critical->add_option("--gamma", o.gammas, "Dimension ratio; p = round(gamma * n) when --p is absent")->expected(1);
  add_eta(*critical, o);
  add_reps_seed(*critical, o);
  add_output(*critical, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? rlrt::cmd::kSuccess : rlrt::cmd::kError;
  }

  try {
    const auto& command = app.get_subcommands().front()->get_name();
    const auto result = dispatch(command, o);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    if (o.output.empty()) std::cout << result.text << std::flush;
    else io::write_file_atomically(o.output, result.text);
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rlrt::cmd::kError;
  }
}
