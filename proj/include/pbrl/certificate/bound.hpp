#pragma once

// Closed-form certificate arithmetic: the bounded-difference coefficients,
// their squared norm, the mixing-aware PAC-Bayes deviation bound, the
// kappa-linearised objective and its minimiser, and the resulting lower
// bound on the posterior's expected value.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "pbrl/core/error.hpp"

namespace pbrl::cert {

/// Trajectory horizon: a positive step count or the infinite marker.
class Horizon {
 public:
  static Horizon finite(std::size_t steps) {
    if (steps == 0) throw UsageError("horizon must be at least 1");
    return Horizon(steps);
  }
  static Horizon infinite() { return Horizon(std::nullopt); }

  bool is_infinite() const { return !steps_.has_value(); }
  std::size_t steps() const {
    if (!steps_) throw UsageError("infinite horizon has no step count");
    return *steps_;
  }
  std::string to_string() const { return steps_ ? std::to_string(*steps_) : std::string("inf"); }

  friend bool operator==(const Horizon&, const Horizon&) = default;

 private:
  explicit Horizon(std::optional<std::size_t> s) : steps_(s) {}
  std::optional<std::size_t> steps_;
};

struct CertificateInputs {
  double r_max = 1.0;
  double gamma = 0.99;
  Horizon horizon = Horizon::finite(1);
  std::size_t n_trajectories = 1;
  double tau_min = 4.0;
  double kl = 0.0;
  double delta = 0.1;

  void validate() const {
    if (!(r_max > 0.0) || !std::isfinite(r_max)) throw UsageError("r_max must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must lie in [0, 1]");
    if (gamma == 1.0 && horizon.is_infinite()) throw UsageError("gamma = 1 needs a finite horizon");
    if (n_trajectories == 0) throw UsageError("T must be at least 1");
    if (!(tau_min > 0.0) || !std::isfinite(tau_min)) throw UsageError("tau_min must be positive and finite");
    if (!(kl >= 0.0) || !std::isfinite(kl)) throw UsageError("KL must be nonnegative and finite");
    if (!(delta > 0.0 && delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
  }
};

struct Certificate {
  CertificateInputs inputs;
  double deviation_bound = 0.0;
  double empirical_return = 0.0;
  double certified_lower_bound = 0.0;
  double kappa_star = 0.0;
};

/// gamma^(h-1) * r_max / T for 1-based step h.
inline double c_entry(double r_max, double gamma, std::size_t h, std::size_t n_trajectories) {
  if (h == 0) throw UsageError("c_entry: h is 1-based");
  if (n_trajectories == 0) throw UsageError("c_entry: T must be at least 1");
  return std::pow(gamma, double(h - 1)) * r_max / double(n_trajectories);
}

/// Sum over h < H of gamma^(2h): (1 - gamma^(2H)) / (1 - gamma^2),
/// H for gamma = 1, and 1 / (1 - gamma^2) for an infinite horizon.
inline double discount_energy(double gamma, const Horizon& horizon) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must lie in [0, 1]");
  if (horizon.is_infinite()) {
    if (gamma == 1.0) throw UsageError("gamma = 1 with an infinite horizon has unbounded norm");
    return 1.0 / (1.0 - gamma * gamma);
  }
  if (gamma == 1.0) return double(horizon.steps());
  return (1.0 - std::pow(gamma, 2.0 * double(horizon.steps()))) / (1.0 - gamma * gamma);
}

/// ||c||^2 = r_max^2 (1 - gamma^(2H)) / (T (1 - gamma^2)).
inline double c_norm_sq(double r_max, double gamma, const Horizon& horizon, std::size_t n_trajectories) {
  if (n_trajectories == 0) throw UsageError("c_norm_sq: T must be at least 1");
  return r_max * r_max * discount_energy(gamma, horizon) / double(n_trajectories);
}

/// KL + ln(2/delta).
inline double complexity(double kl, double delta) { return kl + std::log(2.0 / delta); }

/// sqrt( r_max^2 tau_min (1 - gamma^(2H)) / (2 T (1 - gamma^2)) * (KL + ln(2/delta)) ).
inline double pac_bayes_bound(const CertificateInputs& in) {
  in.validate();
  const double scale =
      in.r_max * in.r_max * in.tau_min * discount_energy(in.gamma, in.horizon) / (2.0 * double(in.n_trajectories));
  return std::sqrt(scale * complexity(in.kl, in.delta));
}

/// E[L_hat] + KL/kappa + kappa ||c||^2 tau_min / 8; with include_delta
/// the KL term becomes KL + ln(2/delta).
inline double kappa_objective(double expected_empirical_loss, double kl, double kappa, double c_norm_sq_value,
                              double tau_min, double delta, bool include_delta) {
  if (!(kappa > 0.0)) throw UsageError("kappa must be positive");
  const double numer = include_delta ? complexity(kl, delta) : kl;
  return expected_empirical_loss + numer / kappa + kappa * c_norm_sq_value * tau_min / 8.0;
}

/// sqrt( 8 (KL + ln(2/delta)) / (||c||^2 tau_min) ).
inline double kappa_star(double kl, double delta, double c_norm_sq_value, double tau_min) {
  const double denom = c_norm_sq_value * tau_min;
  if (!(denom > 0.0)) throw UsageError("kappa_star: ||c||^2 * tau_min must be positive");
  return std::sqrt(8.0 * complexity(kl, delta) / denom);
}

/// empirical return minus the deviation bound.
inline Certificate value_lower_bound(double expected_empirical_return, const CertificateInputs& in) {
  Certificate c;
  c.inputs = in;
  c.deviation_bound = pac_bayes_bound(in);
  c.empirical_return = expected_empirical_return;
  c.certified_lower_bound = expected_empirical_return - c.deviation_bound;
  c.kappa_star = kappa_star(in.kl, in.delta, c_norm_sq(in.r_max, in.gamma, in.horizon, in.n_trajectories), in.tau_min);
  return c;
}

}  // namespace pbrl::cert
