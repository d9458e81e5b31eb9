#pragma once

#include <array>
#include <string>
#include <vector>

#include "pbrl/mdp/tabular_mdp.hpp"

namespace pbrl::mdp {

/// Four-state machine showing that a Bellman-error sequence need not be
/// Markov: A -> C and B -> D with reward 0, C and D self-loop with
/// rewards +1 and -1, discount 0, one action.
class CounterexampleMDP {
 public:
  enum State : std::size_t { A = 0, B = 1, C = 2, D = 3 };

  static constexpr std::array<State, 4> kSuccessor{C, D, C, D};
  static constexpr std::array<double, 4> kReward{0.0, 0.0, 1.0, -1.0};
  static constexpr double kGamma = 0.0;

  static char name(std::size_t s) { return "ABCD"[s]; }

  /// Tabular form with the given initial distribution. Rewards are signed
  /// here, so the usual [0, r_max] check is widened to [-1, 1].
  static TabularMDP as_tabular(Eigen::Vector4d initial) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(4, 4);
    Eigen::MatrixXd R(4, 1);
    for (std::size_t s = 0; s < 4; ++s) {
      P(Eigen::Index(s), Eigen::Index(kSuccessor[s])) = 1.0;
      R(Eigen::Index(s), 0) = kReward[s];
    }
    return TabularMDP({P}, R, Eigen::VectorXd(initial), kGamma, 1.0, -1.0);
  }

  /// r(s) + gamma * max_a E[V(s') | s, a] - V(s); one action, deterministic successor.
  static double bellman_error(std::size_t s, const std::array<double, 4>& value) {
    return kReward[s] + kGamma * value[kSuccessor[s]] - value[s];
  }
};

struct BellmanErrorPair {
  char start = 'A';
  char next = 'C';
  double delta_t = 0.0;
  double delta_next = 0.0;
};

/// Bellman errors at the start state and its successor, for starts A and B.
inline std::vector<BellmanErrorPair> bellman_error_sequence(const std::array<double, 4>& value = {0.0, 0.0, 0.0, 0.0}) {
  std::vector<BellmanErrorPair> out;
  for (auto s : {CounterexampleMDP::A, CounterexampleMDP::B}) {
    auto n = CounterexampleMDP::kSuccessor[s];
    out.push_back({CounterexampleMDP::name(s), CounterexampleMDP::name(n), CounterexampleMDP::bellman_error(s, value),
                   CounterexampleMDP::bellman_error(n, value)});
  }
  return out;
}

}  // namespace pbrl::mdp
