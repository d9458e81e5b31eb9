#pragma once

#include <concepts>
#include <limits>
#include <span>
#include <vector>

#include "pbrl/core/random.hpp"

namespace pbrl::mdp {

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminal = false;
};

/// What a policy hands back to a rollout: the action taken and, when the
/// policy is stochastic, its log-density.
struct ActionSample {
  std::vector<double> action;
  double log_prob = std::numeric_limits<double>::quiet_NaN();
};

template <class E>
concept Environment = requires(E env, const E cenv, Rng& rng, std::span<const double> action) {
  { cenv.state_dim() } -> std::convertible_to<std::size_t>;
  { cenv.action_dim() } -> std::convertible_to<std::size_t>;
  { cenv.r_max() } -> std::convertible_to<double>;
  { env.reset(rng) } -> std::same_as<std::vector<double>>;
  { env.step(action, rng) } -> std::same_as<StepResult>;
};

template <class P>
concept Policy = requires(P policy, std::span<const double> state, Rng& rng) {
  { policy(state, rng) } -> std::same_as<ActionSample>;
};

}  // namespace pbrl::mdp
