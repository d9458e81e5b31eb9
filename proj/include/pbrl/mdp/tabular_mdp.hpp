#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/environment.hpp"

namespace pbrl::mdp {

/// Finite MDP with explicit P(s'|s,a), reward table R(s,a), and initial
/// distribution. States and actions travel through the Environment
/// interface as one-element vectors holding the index.
class TabularMDP {
 public:
  static constexpr double kRowTolerance = 1e-12;

  /// transitions[a] is the n x n row-stochastic matrix of action a;
  /// rewards is n x n_actions.
  TabularMDP(std::vector<Eigen::MatrixXd> transitions, Eigen::MatrixXd rewards, Eigen::VectorXd initial, double gamma,
             double r_max, double reward_floor = 0.0)
      : P_(std::move(transitions)), R_(std::move(rewards)), nu_(std::move(initial)), gamma_(gamma), r_max_(r_max) {
    if (P_.empty()) throw ConfigError("tabular MDP needs at least one action");
    const auto n = P_.front().rows();
    if (n == 0) throw ConfigError("tabular MDP needs at least one state");
    for (std::size_t a = 0; a < P_.size(); ++a) {
      const auto& m = P_[a];
      if (m.rows() != n || m.cols() != n) throw ConfigError("transition matrix of action " + std::to_string(a) + " is not n x n");
      for (Eigen::Index s = 0; s < n; ++s) {
        if ((m.row(s).array() < 0.0).any())
          throw ValidationError("negative probability in action " + std::to_string(a) + " row " + std::to_string(s));
        if (std::abs(m.row(s).sum() - 1.0) > kRowTolerance)
          throw ValidationError("row " + std::to_string(s) + " of action " + std::to_string(a) + " does not sum to 1");
      }
    }
    if (R_.rows() != n || R_.cols() != Eigen::Index(P_.size())) throw ConfigError("reward table must be n_states x n_actions");
    if (nu_.size() != n) throw ConfigError("initial distribution length differs from n_states");
    if ((nu_.array() < 0.0).any() || std::abs(nu_.sum() - 1.0) > kRowTolerance)
      throw ValidationError("initial distribution is not a probability vector");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(r_max_ > 0.0)) throw ConfigError("r_max must be positive");
    if ((R_.array() < reward_floor).any() || (R_.array() > r_max_).any())
      throw ValidationError("reward table leaves [" + std::to_string(reward_floor) + ", r_max]");
  }

  std::size_t n_states() const { return std::size_t(P_.front().rows()); }
  std::size_t n_actions() const { return P_.size(); }
  std::size_t state_dim() const { return 1; }
  std::size_t action_dim() const { return 1; }
  double gamma() const { return gamma_; }
  double r_max() const { return r_max_; }
  const Eigen::MatrixXd& transition(std::size_t action) const { return P_.at(action); }
  const Eigen::MatrixXd& rewards() const { return R_; }
  const Eigen::VectorXd& initial_distribution() const { return nu_; }

  std::vector<double> reset(Rng& rng) {
    state_ = rng.categorical(std::span<const double>(nu_.data(), std::size_t(nu_.size())));
    return {double(state_)};
  }

  StepResult step(std::span<const double> action, Rng& rng) {
    const auto a = to_index(action, n_actions(), "action");
    const auto& row = P_[a];
    std::vector<double> probs(row.cols());
    for (Eigen::Index j = 0; j < row.cols(); ++j) probs[j] = row(Eigen::Index(state_), j);
    const double r = R_(Eigen::Index(state_), Eigen::Index(a));
    state_ = rng.categorical(probs);
    return StepResult{{double(state_)}, r, false};
  }

  /// Forces the current state (tests and enumeration).
  void set_state(std::size_t s) { state_ = s; }

  static std::size_t to_index(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != 1) throw UsageError(std::string(what) + " must be a single index");
    double x = v[0];
    if (!(x >= 0.0) || x != std::floor(x) || x >= double(n)) throw UsageError(std::string(what) + " index out of range");
    return std::size_t(x);
  }

 private:
  std::vector<Eigen::MatrixXd> P_;
  Eigen::MatrixXd R_;
  Eigen::VectorXd nu_;
  double gamma_;
  double r_max_;
  std::size_t state_ = 0;
};

static_assert(Environment<TabularMDP>);

/// Stochastic tabular policy pi(a|s) stored as an n_states x n_actions matrix.
class TabularPolicy {
 public:
  explicit TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    for (Eigen::Index s = 0; s < probs_.rows(); ++s)
      if ((probs_.row(s).array() < 0.0).any() || std::abs(probs_.row(s).sum() - 1.0) > 1e-12)
        throw ValidationError("policy row " + std::to_string(s) + " is not a distribution");
  }

  /// Row-wise softmax of logits.
  static TabularPolicy softmax(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
      const double m = logits.row(s).maxCoeff();
      double z = 0.0;
      for (Eigen::Index a = 0; a < logits.cols(); ++a) z += (p(s, a) = std::exp(logits(s, a) - m));
      p.row(s) /= z;
    }
    return TabularPolicy(std::move(p));
  }

  static TabularPolicy deterministic(const std::vector<std::size_t>& actions, std::size_t n_actions) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(Eigen::Index(actions.size()), Eigen::Index(n_actions));
    for (std::size_t s = 0; s < actions.size(); ++s) p(Eigen::Index(s), Eigen::Index(actions[s])) = 1.0;
    return TabularPolicy(std::move(p));
  }

  const Eigen::MatrixXd& probs() const { return probs_; }
  double prob(std::size_t s, std::size_t a) const { return probs_(Eigen::Index(s), Eigen::Index(a)); }

  ActionSample operator()(std::span<const double> state, Rng& rng) const {
    const auto s = TabularMDP::to_index(state, std::size_t(probs_.rows()), "state");
    std::vector<double> row(probs_.cols());
    for (Eigen::Index a = 0; a < probs_.cols(); ++a) row[a] = probs_(Eigen::Index(s), a);
    const auto a = rng.categorical(row);
    return ActionSample{{double(a)}, std::log(row[a])};
  }

  double log_prob(std::span<const double> state, std::span<const double> action) const {
    const auto s = TabularMDP::to_index(state, std::size_t(probs_.rows()), "state");
    const auto a = TabularMDP::to_index(action, std::size_t(probs_.cols()), "action");
    return std::log(prob(s, a));
  }

 private:
  Eigen::MatrixXd probs_;
};

static_assert(Policy<TabularPolicy>);

/// Expected discounted return over H steps from the initial distribution,
/// by backward induction on value vectors.
inline double exact_value(const TabularMDP& mdp, const TabularPolicy& policy, std::size_t horizon) {
  const auto n = Eigen::Index(mdp.n_states());
  if (policy.probs().rows() != n || policy.probs().cols() != Eigen::Index(mdp.n_actions()))
    throw ConfigError("policy shape does not match the MDP");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < horizon; ++k) {
    Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      Eigen::VectorXd q = mdp.rewards().col(Eigen::Index(a)) + mdp.gamma() * (mdp.transition(a) * v);
      next.array() += policy.probs().col(Eigen::Index(a)).array() * q.array();
    }
    v = std::move(next);
  }
  return mdp.initial_distribution().dot(v);
}

/// State transition matrix of the chain induced by the policy,
/// sum over a of pi(a|s) P(s'|s,a).
inline Eigen::MatrixXd induced_chain(const TabularMDP& mdp, const TabularPolicy& policy) {
  const auto n = Eigen::Index(mdp.n_states());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < mdp.n_actions(); ++a)
    m += policy.probs().col(Eigen::Index(a)).asDiagonal() * mdp.transition(a);
  return m;
}

/// Five-state chain with drift actions and rewards increasing to the right.
/// Action 1 moves right with probability 0.7, stays with 0.2, moves left
/// with 0.1 (mirrored for action 0); walls reflect into a stay.
inline TabularMDP make_chain_mdp(std::size_t n = 5, double gamma = 0.9) {
  if (n < 2) throw ConfigError("chain needs at least two states");
  const auto N = Eigen::Index(n);
  std::vector<Eigen::MatrixXd> P(2, Eigen::MatrixXd::Zero(N, N));
  for (Eigen::Index s = 0; s < N; ++s) {
    for (int a = 0; a < 2; ++a) {
      const Eigen::Index fwd = a == 1 ? std::min(s + 1, N - 1) : std::max<Eigen::Index>(s - 1, 0);
      const Eigen::Index back = a == 1 ? std::max<Eigen::Index>(s - 1, 0) : std::min(s + 1, N - 1);
      P[a](s, fwd) += 0.7;
      P[a](s, s) += 0.2;
      P[a](s, back) += 0.1;
    }
  }
  Eigen::MatrixXd R(N, 2);
  for (Eigen::Index s = 0; s < N; ++s) {
    R(s, 0) = double(s) / double(N - 1);
    R(s, 1) = 0.9 * double(s) / double(N - 1);
  }
  Eigen::VectorXd nu = Eigen::VectorXd::Constant(N, 1.0 / double(N));
  return TabularMDP(std::move(P), std::move(R), std::move(nu), gamma, 1.0);
}

}  // namespace pbrl::mdp
