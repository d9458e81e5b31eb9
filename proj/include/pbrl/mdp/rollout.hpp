#pragma once

#include <cmath>
#include <string>

#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/environment.hpp"
#include "pbrl/mdp/trajectory.hpp"

namespace pbrl::mdp {

/// Runs one episode of at most `horizon` steps from a fresh reset.
template <Environment Env, Policy Pol>
Trajectory rollout(Env& env, Pol& policy, std::size_t horizon, Rng& rng) {
  if (horizon == 0) throw UsageError("rollout horizon must be at least 1");
  Trajectory tr(env.state_dim(), env.action_dim(), horizon);
  std::vector<double> s = env.reset(rng);
  for (std::size_t t = 0; t < horizon; ++t) {
    ActionSample act = policy(std::span<const double>(s), rng);
    for (double v : act.action)
      if (!std::isfinite(v)) throw NumericError("policy emitted a non-finite action at step " + std::to_string(t));
    StepResult res = env.step(std::span<const double>(act.action), rng);
    tr.push(s, act.action, res.reward, res.next_state, res.terminal, act.log_prob);
    if (res.terminal) break;
    s = std::move(res.next_state);
  }
  return tr;
}

/// T independent rollouts in sequence.
template <Environment Env, Policy Pol>
TrajectoryDataset collect(Env& env, Pol& policy, std::size_t n_trajectories, std::size_t horizon, Rng& rng,
                          std::string behavior_policy_id = {}) {
  TrajectoryDataset ds;
  ds.behavior_policy_id = std::move(behavior_policy_id);
  ds.trajectories.reserve(n_trajectories);
  for (std::size_t j = 0; j < n_trajectories; ++j) ds.trajectories.push_back(rollout(env, policy, horizon, rng));
  return ds;
}

}  // namespace pbrl::mdp
