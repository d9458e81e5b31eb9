#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "pbrl/core/error.hpp"
#include "pbrl/mdp/environment.hpp"

namespace pbrl::mdp {

struct PointMassConfig {
  double max_displacement = 0.1;  // position change per step at |action| = 1
  double start_radius = 2.0;      // starts uniform in [-r, r]^2
  double state_cost = 1.0;
  double action_cost = 0.1;
  double bound = 4.0;  // positions are clamped to [-bound, bound]
  double r_max = 1.0;
};

/// Velocity-controlled point mass in the plane. The goal is the origin;
/// reward is r_max * exp(-(state_cost |p'|^2 + action_cost |a|^2)), which
/// stays in (0, r_max]. Never terminates: episodes end at the caller's horizon.
class PointMass2D {
 public:
  explicit PointMass2D(PointMassConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.max_displacement > 0.0 && cfg_.start_radius >= 0.0 && cfg_.r_max > 0.0 && cfg_.bound > 0.0))
      throw ConfigError("invalid point-mass configuration");
  }

  std::size_t state_dim() const { return 2; }
  std::size_t action_dim() const { return 2; }
  double r_max() const { return cfg_.r_max; }
  const PointMassConfig& config() const { return cfg_; }
  std::span<const double> position() const { return pos_; }

  std::vector<double> reset(Rng& rng) {
    pos_ = {rng.uniform(-cfg_.start_radius, cfg_.start_radius), rng.uniform(-cfg_.start_radius, cfg_.start_radius)};
    return pos_;
  }

  StepResult step(std::span<const double> action, Rng&) {
    if (action.size() != 2) throw UsageError("point mass expects a 2-D action");
    double a2 = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      if (!std::isfinite(action[i])) throw NumericError("non-finite action");
      const double a = std::clamp(action[i], -1.0, 1.0);
      a2 += a * a;
      pos_[i] = std::clamp(pos_[i] + cfg_.max_displacement * a, -cfg_.bound, cfg_.bound);
    }
    const double cost = cfg_.state_cost * (pos_[0] * pos_[0] + pos_[1] * pos_[1]) + cfg_.action_cost * a2;
    const double r = std::clamp(cfg_.r_max * std::exp(-cost), 0.0, cfg_.r_max);
    return StepResult{pos_, r, false};
  }

  /// Saturated proportional controller toward the origin; the reference
  /// the SAC sanity baseline is measured against.
  std::vector<double> reference_action(std::span<const double> state, double gain) const {
    std::vector<double> a(2);
    for (std::size_t i = 0; i < 2; ++i) a[i] = std::clamp(-gain * state[i] / cfg_.max_displacement, -1.0, 1.0);
    return a;
  }

 private:
  PointMassConfig cfg_;
  std::vector<double> pos_{0.0, 0.0};
};

static_assert(Environment<PointMass2D>);

}  // namespace pbrl::mdp
