#pragma once

// Asymptotic quantities for the regularized likelihood ratio statistic
//
//   rLRT(lambda) = sum_i psi(l_i) - log psi(l_i) - 1,  psi(x) = lambda x + 1 - lambda,
//
// under the identity null and the spiked alternative, in the regime
// p / (n - 1) -> gamma in (0, 1).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "rlrt/errors.hpp"
#include "rlrt/normal.hpp"
#include "rlrt/quadrature.hpp"

namespace rlrt {

namespace detail {

inline void require_aspect_ratio(double gamma, const char* where) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError(std::string(where) + ": aspect ratio must lie in (0,1), got " +
                      std::to_string(gamma));
  }
}

}  // namespace detail

/// Sample size n, dimension p, and the centered-covariance quantities
/// n_tilde = n - 1 and gamma_tilde = p / n_tilde.
class DimensionSetup {
 public:
  DimensionSetup(std::size_t n, std::size_t p) : n_(n), p_(p) {
    if (n < 2) throw DomainError("DimensionSetup: need n >= 2, got n=" + std::to_string(n));
    if (p < 1) throw DomainError("DimensionSetup: need p >= 1");
    n_tilde_ = n - 1;
    gamma_tilde_ = static_cast<double>(p) / static_cast<double>(n_tilde_);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return p_; }
  std::size_t n_tilde() const noexcept { return n_tilde_; }
  double gamma_tilde() const noexcept { return gamma_tilde_; }

  /// Throws RegimeError unless gamma_tilde lies in (0,1).
  void require_calibration_regime() const {
    if (!(gamma_tilde_ < 1.0)) {
      throw RegimeError("asymptotic calibration requires p/(n-1) < 1, got p=" + std::to_string(p_) +
                        ", n=" + std::to_string(n_) + " (gamma_tilde=" + std::to_string(gamma_tilde_) +
                        ")");
    }
  }

  bool operator==(const DimensionSetup&) const = default;

 private:
  std::size_t n_;
  std::size_t p_;
  std::size_t n_tilde_;
  double gamma_tilde_;
};

/// Shrinkage intensity lambda in (0,1] and the induced maps psi and g.
class ShrinkageParams {
 public:
  explicit ShrinkageParams(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0 && lambda <= 1.0)) {
      throw DomainError("ShrinkageParams: lambda must lie in (0,1], got " + std::to_string(lambda));
    }
  }

  double lambda() const noexcept { return lambda_; }
  bool unregularized() const noexcept { return lambda_ == 1.0; }

  double psi(double x) const noexcept { return lambda_ * x + (1.0 - lambda_); }
  double g(double x) const noexcept {
    const double t = psi(x);
    return t - std::log(t) - 1.0;
  }

 private:
  double lambda_;
};

/// Marcenko-Pastur law with ratio gamma in (0,1): support [a, b].
struct MpLaw {
  double gamma;
  double a;
  double b;

  explicit MpLaw(double gamma_) : gamma(gamma_) {
    detail::require_aspect_ratio(gamma_, "MpLaw");
    const double r = std::sqrt(gamma_);
    a = (1.0 - r) * (1.0 - r);
    b = (1.0 + r) * (1.0 + r);
  }

  double density(double x) const noexcept {
    if (x <= a || x >= b) return 0.0;
    return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * gamma * x);
  }
};

/// Roots of (1 - lambda) m^2 + (1 - 2 lambda + lambda gamma) m - lambda = 0.
struct MnRoots {
  double m_root;  // negative root, inside (-1/(1-sqrt g), -1/(1+sqrt g))
  double n_root;  // positive root
};

struct Spike {
  double value;
  std::size_t multiplicity = 1;
};

/// Population spectrum with K = sum(multiplicities) eigenvalues away from one.
class SpikedModel {
 public:
  SpikedModel() = default;
  explicit SpikedModel(std::vector<Spike> spikes) : spikes_(std::move(spikes)) {
    for (const auto& s : spikes_) {
      if (!(s.value > 0.0) || !std::isfinite(s.value)) throw DomainError("SpikedModel: spike values must be positive");
      if (s.value == 1.0) throw DomainError("SpikedModel: a spike equal to 1 is not a spike");
      if (s.multiplicity < 1) throw DomainError("SpikedModel: multiplicity must be >= 1");
      k_total_ += s.multiplicity;
    }
  }

  static SpikedModel single(double value) { return SpikedModel({Spike{value, 1}}); }

  const std::vector<Spike>& spikes() const noexcept { return spikes_; }
  std::size_t k_total() const noexcept { return k_total_; }

  static bool is_distant(double spike, double gamma) { return std::abs(spike - 1.0) > std::sqrt(gamma); }

  bool all_distant(double gamma) const {
    for (const auto& s : spikes_)
      if (!is_distant(s.value, gamma)) return false;
    return true;
  }

 private:
  std::vector<Spike> spikes_;
  std::size_t k_total_ = 0;
};

/// Limiting null mean and variance of rLRT - p * centering, plus the
/// centering integral itself.
struct NullAsymptotics {
  double mu;
  double v;
  double centering;
};

enum class SpikePolicy { RequireDistant, AllowClose };

namespace rmt {

inline std::pair<double, double> mp_support(double gamma) {
  const MpLaw law(gamma);
  return {law.a, law.b};
}

inline double mp_density(double x, double gamma) { return MpLaw(gamma).density(x); }

namespace detail {

// Discriminant of the M/N quadratic and the rationalized negative root,
// both finite on the closed interval lambda in (0,1].
struct RootParts {
  double disc_sqrt;
  double m_root;
};

inline RootParts root_parts(double lambda, double gamma) {
  const double b = 1.0 - 2.0 * lambda + lambda * gamma;
  const double disc_sqrt = std::sqrt(b * b + 4.0 * lambda * (1.0 - lambda));
  return {disc_sqrt, -2.0 * lambda / (disc_sqrt - b)};
}

}  // namespace detail

inline MnRoots mn_roots(const ShrinkageParams& params, double gamma) {
  rlrt::detail::require_aspect_ratio(gamma, "mn_roots");
  const double lambda = params.lambda();
  if (params.unregularized()) throw DomainError("mn_roots: lambda = 1 has no finite N root");

  const double b = 1.0 - 2.0 * lambda + lambda * gamma;
  const auto parts = detail::root_parts(lambda, gamma);
  const MnRoots roots{parts.m_root, (parts.disc_sqrt - b) / (2.0 * (1.0 - lambda))};

  const double r = std::sqrt(gamma);
  if (!(roots.m_root > -1.0 / (1.0 - r) && roots.m_root < -1.0 / (1.0 + r) && roots.n_root > 0.0)) {
    throw NumericError("mn_roots: pole configuration violated for lambda=" + std::to_string(lambda) +
                       ", gamma=" + std::to_string(gamma));
  }
  return roots;
}

/// (1/4pi) * int_0^{2pi} log(1 + lambda gamma - 2 lambda sqrt(gamma) cos t) dt,
/// folded onto [0, pi] by symmetry.
inline double mean_angle_integral(double lambda, double gamma) {
  const double r = std::sqrt(gamma);
  const auto res = quadrature::integrate(
      [&](double t) { return std::log(1.0 + lambda * gamma - 2.0 * lambda * r * std::cos(t)); }, 0.0,
      std::numbers::pi, {1e-12, 4000});
  return res.value / (2.0 * std::numbers::pi);
}

/// Null mean evaluated through the angle integral for every lambda,
/// including lambda = 1.
inline double null_mean_integral(const ShrinkageParams& params, double gamma) {
  rlrt::detail::require_aspect_ratio(gamma, "null_mean");
  const double lambda = params.lambda();
  const double lg = 1.0 + lambda * gamma;
  const double root = std::sqrt(lg * lg - 4.0 * lambda * lambda * gamma);
  return -0.5 * std::log(root) + mean_angle_integral(lambda, gamma);
}

inline double null_mean(const ShrinkageParams& params, double gamma) {
  rlrt::detail::require_aspect_ratio(gamma, "null_mean");
  if (params.unregularized()) return -std::log1p(-gamma) / 2.0;
  return null_mean_integral(params, gamma);
}

inline double null_variance(const ShrinkageParams& params, double gamma) {
  rlrt::detail::require_aspect_ratio(gamma, "null_variance");
  if (params.unregularized()) return -2.0 * gamma - 2.0 * std::log1p(-gamma);

  const double lambda = params.lambda();
  const auto [m, n] = mn_roots(params, gamma);
  const double ratio = (m - n) / (m * (1.0 + n));
  if (!(ratio > 0.0)) throw NumericError("null_variance: non-positive log argument");
  const double v = 2.0 * (-lambda / m - lambda * (1.0 + gamma - lambda * gamma) + lambda * gamma / (1.0 + n) -
                          std::log(ratio));
  if (!(v > 0.0)) throw NumericError("null_variance: non-positive variance");
  return v;
}

/// int g dF^{gamma, delta_1}, via the substitution x = 1 + gamma - 2 sqrt(gamma) cos t
/// that removes the square-root edges of the MP density.
inline double centering_integral(const ShrinkageParams& params, double gamma) {
  rlrt::detail::require_aspect_ratio(gamma, "centering_integral");
  const double lambda = params.lambda();
  const double r = std::sqrt(gamma);
  const auto res = quadrature::integrate(
      [&](double t) {
        const double c = std::cos(t);
        const double s = std::sin(t);
        return std::log(1.0 + lambda * gamma - 2.0 * lambda * r * c) / (1.0 + gamma - 2.0 * r * c) * s * s;
      },
      0.0, std::numbers::pi, {1e-12, 4000});
  // g = psi - log psi - 1 with int (psi - 1) dF = 0, so only the log part survives.
  return std::max(0.0, -2.0 / std::numbers::pi * res.value);
}

inline double centering_integral(const ShrinkageParams& params, const DimensionSetup& setup) {
  setup.require_calibration_regime();
  return centering_integral(params, setup.gamma_tilde());
}

inline NullAsymptotics null_asymptotics(const ShrinkageParams& params, double gamma) {
  return {null_mean(params, gamma), null_variance(params, gamma), centering_integral(params, gamma)};
}

inline double spike_phi(double a, double gamma) {
  if (a == 1.0) throw DomainError("spike_phi: undefined at a = 1");
  return a + gamma * a / (a - 1.0);
}

namespace detail {

inline void check_spikes(const SpikedModel& model, double gamma, SpikePolicy policy) {
  if (policy == SpikePolicy::RequireDistant && !model.all_distant(gamma)) {
    throw CloseSpikeError("spiked centering requires every spike to satisfy |a-1| > sqrt(gamma)=" +
                          std::to_string(std::sqrt(gamma)));
  }
}

// log((1-a)/(1+aM)); both factors are negative for a distant spike above one
// and positive for one below. Close spikes can flip one sign; the magnitude is
// used then, with no asymptotic guarantee.
inline double log_spike_ratio(double a, double m) { return std::log(std::abs((1.0 - a) / (1.0 + a * m))); }

}  // namespace detail

/// Per-spike centering constant C(lambda, gamma), literal multi-spike form
/// (requires lambda < 1, where N is finite).
inline double spiked_constant_general(const ShrinkageParams& params, double gamma, const SpikedModel& model,
                                      SpikePolicy policy = SpikePolicy::RequireDistant) {
  rlrt::detail::require_aspect_ratio(gamma, "spiked_constant");
  if (model.k_total() == 0) throw DomainError("spiked_constant: empty spike model");
  detail::check_spikes(model, gamma, policy);
  const double lambda = params.lambda();
  const auto [m, n] = mn_roots(params, gamma);
  const double k = static_cast<double>(model.k_total());

  double mean_a = 0.0, mean_log_psi_phi = 0.0, mean_log_ratio = 0.0, mean_pole = 0.0, residues = 0.0;
  for (const auto& s : model.spikes()) {
    const double w = static_cast<double>(s.multiplicity) / k;
    const double a = s.value;
    const double am = 1.0 + a * m;
    mean_a += w * a;
    mean_log_psi_phi += w * std::log(params.psi(spike_phi(a, gamma)));
    mean_log_ratio += w * detail::log_spike_ratio(a, m);
    mean_pole += w * (1.0 / am - 1.0 / (1.0 - a));
    const double outer = (a * (m + 1.0) / am - a * gamma * m * m / (am * (m + 1.0)) - 1.0 +
                          gamma * m * m / ((m + 1.0) * (m + 1.0))) /
                         (m - n);
    const double inner = (a * gamma / (1.0 - a) + gamma * (2.0 * m * n + m + n) / ((m + 1.0) * (n + 1.0))) /
                         ((m + 1.0) * (n + 1.0));
    residues += w * (outer - inner);
  }
  return lambda * mean_a - lambda - mean_log_psi_phi -
         (std::log(-m) / gamma + mean_log_ratio - mean_pole) + lambda / (1.0 - lambda) * residues;
}

/// Single-spike constant for a = 1 + beta, in the compound-symmetry form.
/// Algebraically equal to spiked_constant_general with K = 1; kept as an
/// independent evaluation route.
inline double spiked_constant_single(const ShrinkageParams& params, double gamma, double beta,
                                     SpikePolicy policy = SpikePolicy::RequireDistant) {
  rlrt::detail::require_aspect_ratio(gamma, "spiked_constant");
  const SpikedModel model = SpikedModel::single(1.0 + beta);
  detail::check_spikes(model, gamma, policy);
  const double lambda = params.lambda();
  const auto [m, n] = mn_roots(params, gamma);
  const double a = 1.0 + beta;
  const double am = 1.0 + a * m;
  return lambda * beta - std::log(params.psi(spike_phi(a, gamma))) +
         (1.0 / lambda + std::log(-1.0 / m)) / gamma + 1.0 / am - detail::log_spike_ratio(a, m) +
         lambda / ((1.0 - lambda) * (m - n)) *
             (a * (m + 1.0) / am - gamma * a * m * m / (am * (m + 1.0)) - 1.0 +
              gamma * m * m / ((m + 1.0) * (m + 1.0)));
}

/// C(lambda, gamma) in the reduced form that stays finite at lambda = 1:
/// the (M+1)(N+1) residue block is replaced by its closed value 1/(lambda gamma)
/// and lambda / ((1-lambda)(M-N)) by -lambda / sqrt(disc).
inline double spiked_constant_reduced(const ShrinkageParams& params, double gamma, const SpikedModel& model,
                                      SpikePolicy policy = SpikePolicy::RequireDistant) {
  rlrt::detail::require_aspect_ratio(gamma, "spiked_constant");
  if (model.k_total() == 0) throw DomainError("spiked_constant: empty spike model");
  detail::check_spikes(model, gamma, policy);
  const double lambda = params.lambda();
  const auto [disc_sqrt, m] = detail::root_parts(lambda, gamma);
  const double k = static_cast<double>(model.k_total());

  double acc = 0.0;
  for (const auto& s : model.spikes()) {
    const double a = s.value;
    const double am = 1.0 + a * m;
    const double bracket = a * (m + 1.0) / am - a * gamma * m * m / (am * (m + 1.0)) - 1.0 +
                           gamma * m * m / ((m + 1.0) * (m + 1.0));
    acc += static_cast<double>(s.multiplicity) / k *
           (lambda * (a - 1.0) - std::log(params.psi(spike_phi(a, gamma))) + 1.0 / am -
            detail::log_spike_ratio(a, m) - lambda / disc_sqrt * bracket);
  }
  return acc + (1.0 / lambda - std::log(-m)) / gamma;
}

/// Per-spike constant for any lambda in (0,1]: the literal form for lambda < 1,
/// the reduced form at lambda = 1.
inline double spiked_constant(const ShrinkageParams& params, double gamma, const SpikedModel& model,
                              SpikePolicy policy = SpikePolicy::RequireDistant) {
  if (params.unregularized()) return spiked_constant_reduced(params, gamma, model, policy);
  return spiked_constant_general(params, gamma, model, policy);
}

/// p * int g dF^{gamma_tilde, H_p} for a spiked population, dropping the O(1/n^2) remainder.
inline double spiked_centering(const ShrinkageParams& params, const DimensionSetup& setup, const SpikedModel& model,
                               SpikePolicy policy = SpikePolicy::RequireDistant) {
  setup.require_calibration_regime();
  const double gamma = setup.gamma_tilde();
  const double p = static_cast<double>(setup.p());
  const double base = centering_integral(params, gamma);
  if (model.k_total() == 0) return p * base;
  if (model.k_total() > setup.p()) throw DomainError("spiked_centering: more spikes than dimensions");
  const double k = static_cast<double>(model.k_total());
  return (p - k) * base + k * spiked_constant(params, gamma, model, policy);
}

/// Asymptotic power of the one-sided level-eta rLRT(lambda) against the
/// compound-symmetry alternative I + (beta/p) J (single spike 1 + beta).
inline double analytic_power_cs(const ShrinkageParams& params, const DimensionSetup& setup, double beta, double eta,
                                SpikePolicy policy = SpikePolicy::RequireDistant) {
  setup.require_calibration_regime();
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("analytic_power_cs: level must lie in (0,1)");
  if (!(beta > 0.0)) throw DomainError("analytic_power_cs: beta must be positive");
  const double gamma = setup.gamma_tilde();
  const double shift =
      spiked_constant(params, gamma, SpikedModel::single(1.0 + beta), policy) - centering_integral(params, gamma);
  const double sd = std::sqrt(null_variance(params, gamma));
  return normal::upper_tail(normal::quantile(1.0 - eta) - shift / sd);
}

}  // namespace rmt
}  // namespace rlrt
