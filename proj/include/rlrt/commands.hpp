#pragma once

// Command implementations behind the `rlrt` executable. Each command
// validates its whole configuration before computing anything and returns
// the serialized output; the executable only parses flags and writes files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rlrt/cli_io.hpp"
#include "rlrt/hypothesis_tests.hpp"
#include "rlrt/montecarlo.hpp"
#include "rlrt/rmt_core.hpp"

namespace rlrt::cmd {

enum ExitCode : int { kSuccess = 0, kError = 1, kReject = 2 };

struct CommandOutput {
  int exit_code = kSuccess;
  std::string text;
  std::vector<io::Record> records;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::int64_t as_int(std::size_t v) { return static_cast<std::int64_t>(v); }

class ConfigText {
 public:
  template <class T>
  ConfigText& add(const std::string& key, const T& value) {
    out_ << key << '=';
    if constexpr (std::is_floating_point_v<T>) out_ << io::format_double(value);
    else out_ << value;
    out_ << ';';
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

inline std::string join_methods(const std::vector<MethodSpec>& methods) {
  std::string out;
  for (const auto& m : methods) out += (out.empty() ? "" : "|") + m.id();
  return out;
}

}  // namespace detail

/// "rlrt", "clrt", "lw", "chen" or "rlrt(<lambda>)".
inline MethodSpec parse_method(const std::string& text, double default_lambda) {
  if (text == "rlrt") return MethodSpec::rlrt(default_lambda);
  if (text == "clrt") return MethodSpec::clrt();
  if (text == "lw") return MethodSpec::lw();
  if (text == "chen") return MethodSpec::chen();
  if (text.rfind("rlrt(", 0) == 0 && text.back() == ')') {
    const std::string inner = text.substr(5, text.size() - 6);
    std::size_t used = 0;
    double lambda = 0.0;
    try {
      lambda = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != inner.size()) throw DomainError("method: cannot parse lambda in '" + text + "'");
    return MethodSpec::rlrt(lambda);
  }
  throw DomainError("method must be one of rlrt, clrt, lw, chen (or rlrt(<lambda>)), got '" + text + "'");
}

/// Expands method names against a lambda list: each bare "rlrt" yields one
/// method per lambda.
inline std::vector<MethodSpec> expand_methods(const std::vector<std::string>& names, const std::vector<double>& lambdas) {
  std::vector<MethodSpec> out;
  const std::vector<double> ls = lambdas.empty() ? std::vector<double>{0.5} : lambdas;
  for (const auto& name : names) {
    if (name == "rlrt") {
      for (double l : ls) out.push_back(MethodSpec::rlrt(l));
    } else {
      out.push_back(parse_method(name, ls.front()));
    }
  }
  return out;
}

/// "0.8,1.2,2" or "start:stop:step" (inclusive). Returned sorted, duplicates removed.
inline std::vector<double> parse_beta_grid(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) throw DomainError("beta grid: cannot parse '" + s + "'");
    return v;
  };
  if (std::count(text.begin(), text.end(), ':') == 2) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    const double start = number(text.substr(0, c1));
    const double stop = number(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = number(text.substr(c2 + 1));
    if (!(step > 0.0) || stop < start) throw DomainError("beta grid: need step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(number(io::detail::trim(item)));
  }
  if (out.empty()) throw DomainError("beta grid is empty");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------- test

struct TestConfig {
  std::filesystem::path input;
  std::vector<MethodSpec> methods{MethodSpec::rlrt(0.5)};
  double eta = htest::kDefaultLevel;
  bool transpose = false;
  bool exit_on_reject = false;
  io::Format format = io::Format::Csv;
};

inline io::Record test_record(const TestResult& r, std::optional<double> lambda, double eta) {
  io::Record rec;
  rec.set("method", r.method);
  if (lambda) rec.set("lambda", *lambda);
  else rec.set("lambda", std::string{});
  rec.set("n", detail::as_int(r.setup.n()))
      .set("p", detail::as_int(r.setup.p()))
      .set("gamma_tilde", r.setup.gamma_tilde())
      .set("raw", r.raw)
      .set("z", r.z)
      .set("p_value", r.p_value)
      .set("eta", eta)
      .set("reject", r.reject);
  return rec;
}

inline CommandOutput cmd_test(const TestConfig& cfg) {
  htest::require_level(cfg.eta);
  if (cfg.methods.empty()) throw DomainError("test: no method selected");
  if (!std::filesystem::exists(cfg.input)) throw std::runtime_error("input file not found: '" + cfg.input.string() + "'");
  const DataMatrix data = io::read_data_file(cfg.input, cfg.transpose);

  CommandOutput out;
  bool any_reject = false;
  for (const auto& spec : cfg.methods) {
    const auto result = htest::run_test(spec, data, cfg.eta);
    any_reject = any_reject || result.reject;
    const bool ridge = spec.method == Method::Rlrt || spec.method == Method::Clrt;
    out.records.push_back(test_record(result, ridge ? std::optional<double>(spec.lambda) : std::nullopt, cfg.eta));
  }
  io::Provenance prov;
  prov.command = "test";
  prov.config = detail::ConfigText()
                    .add("input", cfg.input.filename().string())
                    .add("methods", detail::join_methods(cfg.methods))
                    .add("eta", cfg.eta)
                    .add("transpose", cfg.transpose)
                    .str();
  prov.timestamp = detail::utc_timestamp();
  out.text = io::serialize(out.records, prov, cfg.format);
  out.exit_code = (cfg.exit_on_reject && any_reject) ? kReject : kSuccess;
  return out;
}

// ---------------------------------------------------------- null-params

struct NullParamsConfig {
  double lambda = 0.5;
  std::size_t n = 0;
  std::size_t p = 0;
  io::Format format = io::Format::Csv;
};

inline CommandOutput cmd_null_params(const NullParamsConfig& cfg) {
  const ShrinkageParams params(cfg.lambda);
  const DimensionSetup setup(cfg.n, cfg.p);
  setup.require_calibration_regime();
  const double gamma = setup.gamma_tilde();
  const auto cal = htest::LrtCalibration::make(params, setup);

  io::Record rec;
  rec.set("lambda", cfg.lambda)
      .set("n", detail::as_int(cfg.n))
      .set("p", detail::as_int(cfg.p))
      .set("n_tilde", detail::as_int(setup.n_tilde()))
      .set("gamma_tilde", gamma)
      .set("mu", cal.mu)
      .set("v", cal.v)
      .set("centering", cal.p_centering / static_cast<double>(cfg.p))
      .set("p_centering", cal.p_centering);

  CommandOutput out;
  out.records.push_back(rec);
  io::Provenance prov;
  prov.command = "null-params";
  prov.config = detail::ConfigText().add("lambda", cfg.lambda).add("n", cfg.n).add("p", cfg.p).str();
  out.text = io::serialize(out.records, prov, cfg.format);
  return out;
}

// ------------------------------------------------------------- simulate

struct SimulateConfig {
  mc::SimulationGrid grid;
  A1TwosRule a1_rule;
  io::Format format = io::Format::Csv;
};

/// The desk-scale default: null scenario, n in {20, 40, 80}, gamma in
/// {0.2, 0.5, 0.8}, cLRT, rLRT(0.8/0.5/0.2) and LW at 10^4 replications.
inline mc::SimulationGrid default_grid() {
  mc::SimulationGrid g;
  g.scenarios = {Scenario::null()};
  g.sample_sizes = {20, 40, 80};
  g.gammas = {0.2, 0.5, 0.8};
  g.methods = {MethodSpec::clrt(), MethodSpec::rlrt(0.8), MethodSpec::rlrt(0.5), MethodSpec::rlrt(0.2),
               MethodSpec::lw()};
  g.reps = 10000;
  g.chen_reps = 200;
  return g;
}

inline io::Record cell_record(const mc::CellResult& c) {
  io::Record rec;
  rec.set("scenario", c.scenario)
      .set("n", detail::as_int(c.n))
      .set("p", detail::as_int(c.p))
      .set("gamma", c.gamma)
      .set("method", c.method);
  if (c.method.rfind("rlrt", 0) == 0 || c.method == "clrt") rec.set("lambda", c.lambda);
  else rec.set("lambda", std::string{});
  rec.set("reps", detail::as_int(c.reps));
  if (c.error.empty()) rec.set("rate", c.rejection_rate).set("mc_se", c.monte_carlo_se);
  else rec.set("rate", std::string{}).set("mc_se", std::string{});
  rec.set("seed", std::to_string(c.seed)).set("error", c.error);
  return rec;
}

inline std::string grid_config_text(const mc::SimulationGrid& g, const A1TwosRule& rule) {
  detail::ConfigText t;
  std::string scen, ns, gs;
  for (const auto& s : g.scenarios) scen += (scen.empty() ? "" : "|") + s.name();
  for (auto n : g.sample_sizes) ns += (ns.empty() ? "" : "|") + std::to_string(n);
  for (double x : g.gammas) gs += (gs.empty() ? "" : "|") + io::format_double(x);
  t.add("scenarios", scen).add("n", ns).add("gamma", gs).add("methods", detail::join_methods(g.methods));
  t.add("reps", g.reps).add("chen_reps", g.chen_reps).add("seed", g.master_seed).add("eta", g.eta);
  t.add("a1_twos_rule", rule.name());
  return t.str();
}

inline CommandOutput cmd_simulate(const SimulateConfig& cfg) {
  mc::SimulationGrid grid = cfg.grid;
  for (auto& s : grid.scenarios) s.a1_rule = cfg.a1_rule;
  mc::validate(grid);
  const auto cells = mc::run_grid(grid);

  CommandOutput out;
  for (const auto& c : cells) {
    out.records.push_back(cell_record(c));
    if (!c.error.empty()) out.warnings.push_back(c.scenario + " n=" + std::to_string(c.n) + " " + c.method + ": " + c.error);
  }
  io::Provenance prov;
  prov.command = "simulate";
  prov.seed = grid.master_seed;
  // Worker count is deliberately absent: it cannot change the output.
  prov.config = grid_config_text(grid, cfg.a1_rule);
  out.text = io::serialize(out.records, prov, cfg.format);
  return out;
}

struct EmitDataConfig {
  Scenario scenario;
  std::size_t n = 0;
  std::size_t p = 0;
  std::uint64_t seed = 0;
};

/// One n x p dataset from stream (seed, 0, 0), rows = observations.
inline CommandOutput cmd_emit_data(const EmitDataConfig& cfg) {
  if (cfg.n < 2 || cfg.p < 1) throw DomainError("emit-data: need n >= 2 and p >= 1");
  rng::Stream stream({cfg.seed, 0, 0});
  const DataMatrix data = mc::sample_mvn(cfg.n, mc::materialize_sigma(cfg.scenario, cfg.p), stream);
  std::ostringstream text;
  text << "# tool=" << io::kToolName << ' ' << io::kToolVersion << '\n';
  text << "# command=simulate --emit-data\n";
  text << "# seed=" << cfg.seed << '\n';
  const std::string config = detail::ConfigText()
                                 .add("scenario", cfg.scenario.name())
                                 .add("a1_twos_rule", cfg.scenario.a1_rule.name())
                                 .add("n", cfg.n)
                                 .add("p", cfg.p)
                                 .add("seed", cfg.seed)
                                 .str();
  text << "# config_hash=" << io::hex64(io::fnv1a64(config)) << '\n';
  text << "# config=" << config << '\n';
  io::write_matrix(text, data.values());
  CommandOutput out;
  out.text = text.str();
  return out;
}

// ---------------------------------------------------------- power-curve

struct PowerCurveConfig {
  double lambda = 0.5;
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> betas;
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  double eta = htest::kDefaultLevel;
  bool allow_close_spike = false;
  std::size_t workers = 0;
  io::Format format = io::Format::Csv;
};

inline CommandOutput cmd_power_curve(const PowerCurveConfig& cfg) {
  const ShrinkageParams params(cfg.lambda);
  const DimensionSetup setup(cfg.n, cfg.p);
  setup.require_calibration_regime();
  htest::require_level(cfg.eta);
  if (cfg.reps < 1) throw DomainError("power-curve: reps must be >= 1");
  if (cfg.betas.empty()) throw DomainError("power-curve: empty beta grid");
  std::vector<double> betas = cfg.betas;
  std::sort(betas.begin(), betas.end());
  betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

  const double edge = std::sqrt(setup.gamma_tilde());
  CommandOutput out;
  for (double b : betas) {
    if (!(b > 0.0)) throw DomainError("power-curve: beta values must be positive");
    if (!(b > edge)) {
      if (!cfg.allow_close_spike) {
        throw CloseSpikeError("power-curve: beta=" + io::format_double(b) + " is a close spike (<= sqrt(p/(n-1))=" +
                              io::format_double(edge) + "); pass --allow-close-spike to include it");
      }
      out.warnings.push_back("beta=" + io::format_double(b) +
                             " is a close spike; the analytic power there carries no asymptotic guarantee");
    }
  }

  const MethodSpec spec = params.unregularized() ? MethodSpec::clrt() : MethodSpec::rlrt(cfg.lambda);
  const auto empirical = mc::empirical_power_curve(betas, setup, spec, cfg.reps, cfg.seed, cfg.eta, cfg.workers);
  for (std::size_t k = 0; k < betas.size(); ++k) {
    const bool close = !(betas[k] > edge);
    double analytic = std::nan("");
    std::string note;
    try {
      analytic = rmt::analytic_power_cs(params, setup, betas[k], cfg.eta,
                                        close ? SpikePolicy::AllowClose : SpikePolicy::RequireDistant);
    } catch (const std::exception& e) {
      note = e.what();
    }
    if (!std::isfinite(analytic) && note.empty()) note = "analytic power undefined at this beta";
    io::Record rec;
    rec.set("beta", betas[k]).set("close_spike", close);
    if (std::isfinite(analytic)) rec.set("analytic_power", analytic);
    else rec.set("analytic_power", std::string{});
    rec.set("empirical_power", empirical[k].rate).set("mc_se", empirical[k].mc_se).set("note", note);
    out.records.push_back(rec);
  }

  io::Provenance prov;
  prov.command = "power-curve";
  prov.seed = cfg.seed;
  std::string grid;
  for (double b : betas) grid += (grid.empty() ? "" : "|") + io::format_double(b);
  prov.config = detail::ConfigText()
                    .add("lambda", cfg.lambda)
                    .add("n", cfg.n)
                    .add("p", cfg.p)
                    .add("betas", grid)
                    .add("reps", cfg.reps)
                    .add("seed", cfg.seed)
                    .add("eta", cfg.eta)
                    .add("allow_close_spike", cfg.allow_close_spike)
                    .str();
  out.text = io::serialize(out.records, prov, cfg.format);
  return out;
}

// ------------------------------------------------------- critical-value

struct CriticalValueConfig {
  MethodSpec method = MethodSpec::rlrt(0.5);
  std::size_t n = 0;
  std::size_t p = 0;
  double eta = htest::kDefaultLevel;
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  io::Format format = io::Format::Csv;
};

inline CommandOutput cmd_critical_value(const CriticalValueConfig& cfg) {
  const DimensionSetup setup(cfg.n, cfg.p);
  htest::require_level(cfg.eta);
  const double q = mc::empirical_critical_value(cfg.method, setup, cfg.eta, cfg.reps, cfg.seed, cfg.workers);
  io::Record rec;
  rec.set("method", cfg.method.id())
      .set("n", detail::as_int(cfg.n))
      .set("p", detail::as_int(cfg.p))
      .set("eta", cfg.eta)
      .set("reps", detail::as_int(cfg.reps))
      .set("critical_value", q)
      .set("nominal", normal::quantile(1.0 - cfg.eta));
  CommandOutput out;
  out.records.push_back(rec);
  io::Provenance prov;
  prov.command = "critical-value";
  prov.seed = cfg.seed;
  prov.config = detail::ConfigText()
                    .add("method", cfg.method.id())
                    .add("n", cfg.n)
                    .add("p", cfg.p)
                    .add("eta", cfg.eta)
                    .add("reps", cfg.reps)
                    .add("seed", cfg.seed)
                    .str();
  out.text = io::serialize(out.records, prov, cfg.format);
  return out;
}

}  // namespace rlrt::cmd
