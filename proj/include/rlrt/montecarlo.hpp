#pragma once

// Scenario generators and the size/power/density experiment engine.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "rlrt/covariance.hpp"
#include "rlrt/errors.hpp"
#include "rlrt/hypothesis_tests.hpp"
#include "rlrt/parallel.hpp"
#include "rlrt/rng.hpp"

namespace rlrt {

/// How many variances equal 2 in the heteroscedastic alternative A1.
/// The printed rule reads min{1, floor(0.2p)}; Max is the default.
struct A1TwosRule {
  enum class Kind { Max, Min, Fixed };
  Kind kind = Kind::Max;
  std::size_t fixed = 0;

  std::size_t count(std::size_t p) const {
    const auto fifth = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(p)));
    std::size_t c = 0;
    switch (kind) {
      case Kind::Max: c = std::max<std::size_t>(1, fifth); break;
      case Kind::Min: c = std::min<std::size_t>(1, fifth); break;
      case Kind::Fixed: c = fixed; break;
    }
    return std::min(c, p);
  }

  /// "max", "min" or "fixed:k".
  static A1TwosRule parse(const std::string& text) {
    if (text == "max") return {Kind::Max, 0};
    if (text == "min") return {Kind::Min, 0};
    if (text.rfind("fixed:", 0) == 0) {
      const std::string digits = text.substr(6);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
        throw DomainError("a1 twos rule: expected fixed:<k> with k a non-negative integer, got '" + text + "'");
      }
      return {Kind::Fixed, static_cast<std::size_t>(std::stoull(digits))};
    }
    throw DomainError("a1 twos rule: expected max, min or fixed:<k>, got '" + text + "'");
  }

  std::string name() const {
    switch (kind) {
      case Kind::Max: return "max";
      case Kind::Min: return "min";
      case Kind::Fixed: return "fixed:" + std::to_string(fixed);
    }
    return "max";
  }
};

enum class ScenarioKind { Null, A1Hetero, A2SingleSpike, A3CompoundSymmetry, A4CompoundSymmetry, CsBeta, Custom };

struct Scenario {
  ScenarioKind kind = ScenarioKind::Null;
  double beta = 0.0;  // CsBeta only
  Matrix custom;      // Custom only
  A1TwosRule a1_rule;

  static Scenario null() { return {}; }
  static Scenario a1(A1TwosRule rule = {}) { return {ScenarioKind::A1Hetero, 0.0, {}, rule}; }
  static Scenario a2() { return {ScenarioKind::A2SingleSpike, 0.0, {}, {}}; }
  static Scenario a3() { return {ScenarioKind::A3CompoundSymmetry, 0.0, {}, {}}; }
  static Scenario a4() { return {ScenarioKind::A4CompoundSymmetry, 0.0, {}, {}}; }
  static Scenario cs_beta(double beta) { return {ScenarioKind::CsBeta, beta, {}, {}}; }
  static Scenario custom_sigma(Matrix sigma) { return {ScenarioKind::Custom, 0.0, std::move(sigma), {}}; }

  std::string name() const {
    switch (kind) {
      case ScenarioKind::Null: return "null";
      case ScenarioKind::A1Hetero: return "a1";
      case ScenarioKind::A2SingleSpike: return "a2";
      case ScenarioKind::A3CompoundSymmetry: return "a3";
      case ScenarioKind::A4CompoundSymmetry: return "a4";
      case ScenarioKind::CsBeta: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "cs:%.17g", beta);
        return buf;
      }
      case ScenarioKind::Custom: return "custom";
    }
    return "unknown";
  }

  /// "null", "a1".."a4", or "cs:<beta>".
  static Scenario parse(const std::string& text, A1TwosRule rule = {}) {
    if (text == "null") return null();
    if (text == "a1") return a1(rule);
    if (text == "a2") return a2();
    if (text == "a3") return a3();
    if (text == "a4") return a4();
    if (text.rfind("cs:", 0) == 0) {
      std::size_t used = 0;
      double beta = 0.0;
      try {
        beta = std::stod(text.substr(3), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != text.size() - 3) throw DomainError("scenario: cannot parse beta in '" + text + "'");
      return cs_beta(beta);
    }
    throw DomainError("scenario: expected null, a1, a2, a3, a4 or cs:<beta>, got '" + text + "'");
  }
};

namespace mc {

inline Matrix compound_symmetry(std::size_t p, double rho) {
  const auto d = static_cast<Eigen::Index>(p);
  Matrix sigma = Matrix::Constant(d, d, rho);
  sigma.diagonal().array() += 1.0;
  return sigma;
}

inline Matrix materialize_sigma(const Scenario& scenario, std::size_t p) {
  if (p < 1) throw DomainError("materialize_sigma: need p >= 1");
  const auto d = static_cast<Eigen::Index>(p);
  switch (scenario.kind) {
    case ScenarioKind::Null: return Matrix::Identity(d, d);
    case ScenarioKind::A1Hetero: {
      Matrix sigma = Matrix::Identity(d, d);
      const auto twos = static_cast<Eigen::Index>(scenario.a1_rule.count(p));
      sigma.diagonal().head(twos).setConstant(2.0);
      return sigma;
    }
    case ScenarioKind::A2SingleSpike: {
      Matrix sigma = Matrix::Identity(d, d);
      sigma(0, 0) = 1.0 + 0.2 * static_cast<double>(p);
      return sigma;
    }
    case ScenarioKind::A3CompoundSymmetry: return compound_symmetry(p, 0.2);
    case ScenarioKind::A4CompoundSymmetry: return compound_symmetry(p, 0.1);
    case ScenarioKind::CsBeta:
      // Spectrum {1 + beta, 1, ..., 1}.
      if (!(scenario.beta >= -1.0)) throw DomainError("materialize_sigma: beta < -1 gives a non-PSD covariance");
      return compound_symmetry(p, scenario.beta / static_cast<double>(p));
    case ScenarioKind::Custom: {
      const Matrix& s = scenario.custom;
      if (s.rows() != d || s.cols() != d) throw DomainError("materialize_sigma: custom covariance is not p x p");
      if (!s.allFinite()) throw DomainError("materialize_sigma: custom covariance has non-finite entries");
      const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
      if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw DomainError("materialize_sigma: custom covariance is not symmetric");
      }
      if (cov::sym_eigenvalues(s).back() < -1e-10 * scale) {
        throw DomainError("materialize_sigma: custom covariance is not positive semidefinite");
      }
      return s;
    }
  }
  throw DomainError("materialize_sigma: unknown scenario");
}

/// Draws N(0, Sigma) rows as z^T Sigma^{1/2} with the symmetric (spectral)
/// square root; diagonal covariances are scaled column-wise.
class MvnSampler {
 public:
  explicit MvnSampler(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() < 1) throw DomainError("sample_mvn: sigma must be square");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    const double tol = 1e-10 * scale;
    const Matrix off = sigma - Matrix(sigma.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() == 0.0) {
      if (sigma.diagonal().minCoeff() < -tol) throw DomainError("sample_mvn: sigma is not positive semidefinite");
      diagonal_ = sigma.diagonal().cwiseMax(0.0).cwiseSqrt();
      is_diagonal_ = true;
      return;
    }
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > tol) throw DomainError("sample_mvn: sigma is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (sigma + sigma.transpose()));
    if (solver.info() != Eigen::Success) throw NumericError("sample_mvn: factorization of sigma failed");
    if (solver.eigenvalues().minCoeff() < -tol) throw DomainError("sample_mvn: sigma is not positive semidefinite");
    const Vector root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    root_ = solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose();
  }

  std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(is_diagonal_ ? diagonal_.size() : root_.rows());
  }

  /// n rows; normals are consumed in row-major order from the stream.
  Matrix draw(std::size_t n, rng::Stream& stream) const {
    const auto rows = static_cast<Eigen::Index>(n);
    const auto cols = static_cast<Eigen::Index>(dimension());
    Matrix z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = stream.normal();
    if (is_diagonal_) return z * diagonal_.asDiagonal();
    return z * root_;
  }

 private:
  bool is_diagonal_ = false;
  Vector diagonal_;
  Matrix root_;
};

inline DataMatrix sample_mvn(std::size_t n, const Matrix& sigma, rng::Stream& stream) {
  return DataMatrix(MvnSampler(sigma).draw(n, stream));
}

/// p = round(gamma * n), at least 1.
inline std::size_t dimension_for(double gamma, std::size_t n) {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(gamma * static_cast<double>(n))));
}

/// Raw statistics of `spec` over `reps` replications of `scenario`; replication
/// r draws from stream (seed, cell, r).
inline std::vector<double> simulate_raw(const MethodSpec& spec, const Scenario& scenario, std::size_t n, std::size_t p,
                                        std::size_t reps, std::uint64_t seed, std::uint64_t cell,
                                        std::size_t workers = 0) {
  const MvnSampler sampler(materialize_sigma(scenario, p));
  std::vector<double> out(reps);
  parallel::for_each_index(reps, workers, [&](std::size_t r) {
    rng::Stream stream({seed, cell, r});
    out[r] = htest::raw_statistic(spec, DataMatrix(sampler.draw(n, stream)));
  });
  return out;
}

struct RateEstimate {
  double rate;
  double mc_se;
  std::size_t reps;
};

inline RateEstimate rate_from_count(std::size_t hits, std::size_t reps) {
  if (reps == 0) throw DomainError("replication count must be >= 1");
  const double r = static_cast<double>(hits) / static_cast<double>(reps);
  return {r, std::sqrt(r * (1.0 - r) / static_cast<double>(reps)), reps};
}

/// Rejection rate at level eta, or against an explicit z cutoff when given
/// (reject when z > cutoff).
inline RateEstimate rejection_rate(const MethodSpec& spec, const Scenario& scenario, std::size_t n, std::size_t p,
                                   std::size_t reps, std::uint64_t seed, std::uint64_t cell, double eta,
                                   std::optional<double> cutoff = std::nullopt, std::size_t workers = 0) {
  htest::require_level(eta);
  const htest::Standardizer standardize(spec, DimensionSetup(n, p));
  const auto raw = simulate_raw(spec, scenario, n, p, reps, seed, cell, workers);
  std::size_t hits = 0;
  for (double value : raw) {
    const double z = standardize(value);
    hits += cutoff ? (z > *cutoff) : (normal::upper_tail(z) < eta);
  }
  return rate_from_count(hits, reps);
}

/// Stream cell reserved for null calibration runs.
inline constexpr std::uint64_t kCriticalValueCell = 0xC817'1CA1'0000'0000ULL;

/// Empirical (1 - eta) quantile of the standardized statistic under Sigma = I.
inline double empirical_critical_value(const MethodSpec& spec, const DimensionSetup& setup, double eta,
                                       std::size_t reps, std::uint64_t seed, std::size_t workers = 0) {
  htest::require_level(eta);
  if (reps < 1000) throw DomainError("empirical_critical_value: need at least 1000 replications");
  const htest::Standardizer standardize(spec, setup);
  auto z = simulate_raw(spec, Scenario::null(), setup.n(), setup.p(), reps, seed, kCriticalValueCell, workers);
  for (double& v : z) v = standardize(v);
  // Smallest order statistic with at least (1 - eta) of the mass at or below it.
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - eta) * static_cast<double>(reps) - 1e-9));
  const auto idx = std::clamp<std::size_t>(rank, 1, reps) - 1;
  std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(idx), z.end());
  return z[idx];
}

struct SimulationGrid {
  std::vector<Scenario> scenarios;
  std::vector<std::size_t> sample_sizes;
  std::vector<double> gammas;
  std::vector<MethodSpec> methods;
  std::size_t reps = 10000;
  std::size_t chen_reps = 0;  // 0: same as reps
  std::uint64_t master_seed = 0;
  double eta = htest::kDefaultLevel;
  std::size_t workers = 0;
};

struct CellResult {
  std::string scenario;
  std::size_t n = 0;
  std::size_t p = 0;
  double gamma = 0.0;
  std::string method;
  double lambda = 0.0;
  double rejection_rate = 0.0;
  double monte_carlo_se = 0.0;
  std::size_t reps = 0;
  double elapsed_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string error;  // empty on success
};

inline void validate(const SimulationGrid& grid) {
  if (grid.reps < 1) throw DomainError("simulation grid: reps must be >= 1");
  if (grid.scenarios.empty() || grid.sample_sizes.empty() || grid.gammas.empty() || grid.methods.empty()) {
    throw DomainError("simulation grid: scenarios, sample sizes, gammas and methods must be non-empty");
  }
  htest::require_level(grid.eta);
  for (auto n : grid.sample_sizes)
    if (n < 2) throw DomainError("simulation grid: sample sizes must be >= 2");
  for (double g : grid.gammas)
    if (!(g > 0.0) || !std::isfinite(g)) throw DomainError("simulation grid: gammas must be positive");
}

/// Rejection rates for every (scenario, n, gamma, method) cell.
///
/// Methods sharing a (scenario, n, gamma) data cell see the same datasets:
/// replication r of data cell c draws from stream (master_seed, c, r). The
/// output is therefore identical for any worker count. Errors raised while
/// setting up a method (e.g. cLRT with p >= n - 1) are recorded in the cell.
inline std::vector<CellResult> run_grid(const SimulationGrid& grid) {
  validate(grid);
  const std::size_t chen_reps = grid.chen_reps == 0 ? grid.reps : grid.chen_reps;
  std::vector<CellResult> results;
  std::uint64_t data_cell = 0;

  for (const auto& scenario : grid.scenarios) {
    for (auto n : grid.sample_sizes) {
      for (double gamma : grid.gammas) {
        const auto start = std::chrono::steady_clock::now();
        const std::size_t p = dimension_for(gamma, n);
        const std::size_t first = results.size();

        std::vector<std::optional<htest::Standardizer>> standardizers;
        std::vector<std::size_t> method_reps;
        for (const auto& spec : grid.methods) {
          CellResult cell;
          cell.scenario = scenario.name();
          cell.n = n;
          cell.p = p;
          cell.gamma = gamma;
          cell.method = spec.id();
          cell.lambda = spec.lambda;
          cell.seed = grid.master_seed;
          cell.reps = spec.method == Method::Chen ? chen_reps : grid.reps;
          try {
            standardizers.emplace_back(htest::Standardizer(spec, DimensionSetup(n, p)));
          } catch (const std::exception& e) {
            standardizers.emplace_back(std::nullopt);
            cell.error = e.what();
          }
          method_reps.push_back(cell.reps);
          results.push_back(std::move(cell));
        }

        std::size_t max_reps = 0;
        for (std::size_t m = 0; m < grid.methods.size(); ++m)
          if (standardizers[m]) max_reps = std::max(max_reps, method_reps[m]);

        // rejected[m * max_reps + r]: 1 reject, 0 accept, 2 statistic failed.
        std::vector<std::uint8_t> rejected(grid.methods.size() * max_reps, 0);
        std::string sigma_error;
        std::optional<MvnSampler> sampler;
        try {
          sampler.emplace(materialize_sigma(scenario, p));
        } catch (const std::exception& e) {
          sigma_error = e.what();
        }

        if (sampler && max_reps > 0) {
          parallel::for_each_index(max_reps, grid.workers, [&](std::size_t r) {
            rng::Stream stream({grid.master_seed, data_cell, r});
            const DataMatrix data(sampler->draw(n, stream));
            for (std::size_t m = 0; m < grid.methods.size(); ++m) {
              if (!standardizers[m] || r >= method_reps[m]) continue;
              auto& slot = rejected[m * max_reps + r];
              try {
                const double z = (*standardizers[m])(htest::raw_statistic(grid.methods[m], data));
                slot = normal::upper_tail(z) < grid.eta ? 1 : 0;
              } catch (const std::exception&) {
                slot = 2;
              }
            }
          });
        }

        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (std::size_t m = 0; m < grid.methods.size(); ++m) {
          CellResult& cell = results[first + m];
          cell.elapsed_seconds = elapsed;
          if (!sigma_error.empty()) cell.error = sigma_error;
          if (!cell.error.empty()) continue;
          std::size_t hits = 0, failures = 0;
          for (std::size_t r = 0; r < method_reps[m]; ++r) {
            const auto v = rejected[m * max_reps + r];
            hits += v == 1;
            failures += v == 2;
          }
          if (failures > 0) {
            cell.error = "statistic failed in " + std::to_string(failures) + " replications";
            continue;
          }
          const auto est = rate_from_count(hits, method_reps[m]);
          cell.rejection_rate = est.rate;
          cell.monte_carlo_se = est.mc_se;
        }
        ++data_cell;
      }
    }
  }
  return results;
}

struct PowerPoint {
  double beta;
  double rate;
  double mc_se;
};

/// Empirical power against Sigma_cs(beta/p) for each beta; point k uses stream cell k.
inline std::vector<PowerPoint> empirical_power_curve(const std::vector<double>& betas, const DimensionSetup& setup,
                                                     const MethodSpec& spec, std::size_t reps, std::uint64_t seed,
                                                     double eta = htest::kDefaultLevel, std::size_t workers = 0) {
  std::vector<PowerPoint> curve;
  curve.reserve(betas.size());
  for (std::size_t k = 0; k < betas.size(); ++k) {
    const auto est =
        rejection_rate(spec, Scenario::cs_beta(betas[k]), setup.n(), setup.p(), reps, seed, k, eta, std::nullopt, workers);
    curve.push_back({betas[k], est.rate, est.mc_se});
  }
  return curve;
}

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<double> density;  // sum(density) * width == 1
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance of the raw statistics
  std::size_t reps = 0;
};

inline Histogram histogram(const std::vector<double>& values, std::size_t bins) {
  if (bins < 1) throw DomainError("histogram: need at least one bin");
  if (values.empty()) throw DomainError("histogram: no values");
  Histogram h;
  h.reps = values.size();
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  h.lo = *mn;
  h.width = *mx > *mn ? (*mx - *mn) / static_cast<double>(bins) : 1.0;
  std::vector<std::size_t> counts(bins, 0);
  double sum = 0.0;
  for (double v : values) {
    auto idx = static_cast<std::size_t>((v - h.lo) / h.width);
    counts[std::min(idx, bins - 1)]++;
    sum += v;
  }
  const double count = static_cast<double>(values.size());
  h.mean = sum / count;
  double ss = 0.0;
  for (double v : values) ss += (v - h.mean) * (v - h.mean);
  h.variance = values.size() > 1 ? ss / (count - 1.0) : 0.0;
  h.density.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) h.density[b] = static_cast<double>(counts[b]) / (count * h.width);
  return h;
}

/// Normalized histogram of the raw statistic over `reps` replications.
inline Histogram empirical_density(const MethodSpec& spec, const Scenario& scenario, std::size_t n, std::size_t p,
                                   std::size_t reps, std::uint64_t seed, std::size_t bins, std::size_t workers = 0) {
  return histogram(simulate_raw(spec, scenario, n, p, reps, seed, 0, workers), bins);
}

}  // namespace mc
}  // namespace rlrt
