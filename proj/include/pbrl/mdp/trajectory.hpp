#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pbrl/core/error.hpp"

namespace pbrl::mdp {

/// Read-only view of one stored step. Discrete states and actions are
/// stored as one-element vectors holding the index.
struct Transition {
  std::span<const double> state;
  std::span<const double> action;
  double reward = 0.0;
  std::span<const double> next_state;
  bool terminal = false;
  double behavior_log_prob = std::numeric_limits<double>::quiet_NaN();
};

/// Ordered transitions of one episode or fixed-length segment, stored as
/// flat per-field arrays.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::size_t state_dim, std::size_t action_dim, std::size_t horizon)
      : state_dim_(state_dim), action_dim_(action_dim), horizon_(horizon) {
    if (horizon == 0) throw UsageError("trajectory horizon must be positive");
  }

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t size() const { return rewards_.size(); }
  bool empty() const { return rewards_.empty(); }
  bool ended() const { return !terminals_.empty() && terminals_.back() != 0; }

  void push(std::span<const double> state, std::span<const double> action, double reward,
            std::span<const double> next_state, bool terminal,
            double behavior_log_prob = std::numeric_limits<double>::quiet_NaN()) {
    if (state.size() != state_dim_ || next_state.size() != state_dim_ || action.size() != action_dim_)
      throw ConfigError("transition dimensions do not match the trajectory");
    if (size() >= horizon_) throw UsageError("trajectory already holds its horizon of " + std::to_string(horizon_));
    if (ended()) throw UsageError("cannot append after a terminal transition");
    if (!empty()) {
      auto prev = next_state_at(size() - 1);
      for (std::size_t i = 0; i < state_dim_; ++i)
        if (prev[i] != state[i]) throw ValidationError("transition state does not continue from the previous next_state");
    }
    states_.insert(states_.end(), state.begin(), state.end());
    actions_.insert(actions_.end(), action.begin(), action.end());
    rewards_.push_back(reward);
    next_states_.insert(next_states_.end(), next_state.begin(), next_state.end());
    terminals_.push_back(terminal ? 1 : 0);
    log_probs_.push_back(behavior_log_prob);
  }

  Transition operator[](std::size_t i) const {
    return Transition{state_at(i), action_at(i), rewards_[i], next_state_at(i), terminals_[i] != 0, log_probs_[i]};
  }

  std::span<const double> state_at(std::size_t i) const { return {states_.data() + i * state_dim_, state_dim_}; }
  std::span<const double> action_at(std::size_t i) const { return {actions_.data() + i * action_dim_, action_dim_}; }
  std::span<const double> next_state_at(std::size_t i) const {
    return {next_states_.data() + i * state_dim_, state_dim_};
  }

  std::span<const double> rewards() const { return rewards_; }
  std::span<double> mutable_rewards() { return rewards_; }
  std::span<const double> behavior_log_probs() const { return log_probs_; }
  const std::vector<double>& states() const { return states_; }
  const std::vector<double>& actions() const { return actions_; }

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    auto same_lp = [&] {
      for (std::size_t i = 0; i < a.log_probs_.size(); ++i) {
        double x = a.log_probs_[i], y = b.log_probs_[i];
        if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
      }
      return true;
    };
    return a.state_dim_ == b.state_dim_ && a.action_dim_ == b.action_dim_ && a.horizon_ == b.horizon_ &&
           a.states_ == b.states_ && a.actions_ == b.actions_ && a.rewards_ == b.rewards_ &&
           a.next_states_ == b.next_states_ && a.terminals_ == b.terminals_ && a.log_probs_.size() == b.log_probs_.size() &&
           same_lp();
  }

 private:
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::size_t horizon_ = 1;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
  std::vector<std::uint8_t> terminals_;
  std::vector<double> log_probs_;
};

/// T trajectories collected by one behaviour policy under a shared horizon.
struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  std::string behavior_policy_id;

  std::size_t count() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }

  std::size_t horizon() const {
    if (trajectories.empty()) throw UsageError("empty dataset has no horizon");
    return trajectories.front().horizon();
  }

  /// Checks the shared horizon and that every reward lies in [0, r_max].
  void validate(double r_max) const {
    if (trajectories.empty()) throw UsageError("dataset is empty");
    const std::size_t h = trajectories.front().horizon();
    for (std::size_t j = 0; j < trajectories.size(); ++j) {
      const auto& tr = trajectories[j];
      if (tr.horizon() != h) throw ValidationError("trajectory " + std::to_string(j) + " has a different horizon");
      for (std::size_t i = 0; i < tr.size(); ++i) {
        double r = tr.rewards()[i];
        if (!(r >= 0.0 && r <= r_max))
          throw ValidationError("reward " + std::to_string(r) + " at trajectory " + std::to_string(j) + " step " +
                                std::to_string(i) + " outside [0, " + std::to_string(r_max) + "]");
      }
    }
  }
};

}  // namespace pbrl::mdp
