#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "pbrl/autodiff/adam.hpp"
#include "pbrl/autodiff/tape.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/sac/mlp.hpp"
#include "pbrl/sac/policy.hpp"
#include "pbrl/sac/replay_buffer.hpp"

namespace pbrl::sac {

/// Two Q(s, a) networks over [s | a] with trailing-average targets.
class TwinCritic {
 public:
  TwinCritic() = default;

  TwinCritic(std::size_t state_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden, Rng& rng,
             ad::AdamConfig opt = ad::AdamConfig{1e-3})
      : opt1_(opt), opt2_(opt) {
    std::vector<std::size_t> sizes{state_dim + action_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    q_[0] = MLP(sizes, rng);
    q_[1] = MLP(sizes, rng);
    target_[0] = q_[0];
    target_[1] = q_[1];
  }

  MLP& q(std::size_t i) { return q_.at(i); }
  const MLP& q(std::size_t i) const { return q_.at(i); }
  MLP& target(std::size_t i) { return target_.at(i); }
  const MLP& target(std::size_t i) const { return target_.at(i); }
  ad::AdamState& optimizer(std::size_t i) { return i == 0 ? opt1_ : opt2_; }

  static ad::Tensor join(const ad::Tensor& s, const ad::Tensor& a) {
    if (s.rows() != a.rows()) throw ConfigError("state and action batches differ in length");
    ad::Tensor x(s.rows(), s.cols() + a.cols());
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (std::size_t c = 0; c < s.cols(); ++c) x(r, c) = s(r, c);
      for (std::size_t c = 0; c < a.cols(); ++c) x(r, s.cols() + c) = a(r, c);
    }
    return x;
  }

  /// min(Q1, Q2) from the online networks, B x 1.
  ad::Tensor min_q(const ad::Tensor& s, const ad::Tensor& a) const { return min_of(q_, s, a); }

  /// min(Q1', Q2') from the target networks, B x 1.
  ad::Tensor min_target(const ad::Tensor& s, const ad::Tensor& a) const { return min_of(target_, s, a); }

  void soft_update(double tau) {
    sac::soft_update(q_[0], target_[0], tau);
    sac::soft_update(q_[1], target_[1], tau);
  }

  bool all_finite() const { return q_[0].all_finite() && q_[1].all_finite(); }

 private:
  static ad::Tensor min_of(const std::array<MLP, 2>& nets, const ad::Tensor& s, const ad::Tensor& a) {
    const ad::Tensor x = join(s, a);
    ad::Tensor q1 = nets[0].infer(x);
    const ad::Tensor q2 = nets[1].infer(x);
    for (std::size_t i = 0; i < q1.size(); ++i) q1[i] = std::min(q1[i], q2[i]);
    return q1;
  }

  std::array<MLP, 2> q_;
  std::array<MLP, 2> target_;
  ad::AdamState opt1_, opt2_;
};

/// r + gamma (1 - done) (min Q'(s', a') - alpha log pi(a'|s')), with
/// a' = tanh(m + s z) drawn from the policy with parameters `policy_params`
/// and the supplied standard normal `noise` (B x action_dim).
inline ad::Tensor soft_targets(const TwinCritic& critics, const std::vector<ad::Tensor>& policy_params,
                               std::size_t action_dim, const Batch& batch, const ad::Tensor& noise, double alpha,
                               double gamma) {
  const std::size_t B = batch.size();
  if (noise.rows() != B || noise.cols() != action_dim) throw ConfigError("target noise has the wrong shape");
  const PolicyHead h = GaussianPolicy::head(policy_params, batch.next_states, action_dim);
  ad::Tensor a(B, action_dim), u(B, action_dim);
  std::vector<double> logp(B);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t c = 0; c < action_dim; ++c) {
      u(r, c) = h.mean(r, c) + std::exp(h.log_std(r, c)) * noise(r, c);
      a(r, c) = std::tanh(u(r, c));
    }
    const std::size_t off = r * action_dim;
    logp[r] = squashed_log_prob(std::span<const double>(h.log_std.data()).subspan(off, action_dim),
                                std::span<const double>(noise.data()).subspan(off, action_dim),
                                std::span<const double>(u.data()).subspan(off, action_dim));
  }
  const ad::Tensor qn = critics.min_target(batch.next_states, a);
  ad::Tensor y(B, 1);
  for (std::size_t r = 0; r < B; ++r)
    y[r] = batch.rewards[r] + gamma * (1.0 - batch.dones[r]) * (qn[r] - alpha * logp[r]);
  return y;
}

/// One Adam step of each online critic on mean squared error to `targets`.
/// Returns MSE(Q1) + MSE(Q2) before the step.
inline double regress_critics(TwinCritic& critics, const Batch& batch, const ad::Tensor& targets) {
  if (batch.size() == 0) throw UsageError("critic update needs a nonempty batch");
  const ad::Tensor x = TwinCritic::join(batch.states, batch.actions);
  double loss = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    ad::Var q = critics.q(i).forward(tape, tape.constant(x), true, &leaves);
    ad::Var mse = ad::mean(ad::square(q - tape.constant(targets)));
    tape.backward(mse);
    loss += tape.value(mse).item();
    std::vector<ad::Tensor> grads;
    for (auto v : leaves) grads.push_back(tape.grad(v));
    critics.optimizer(i).step(critics.q(i).params(), grads);
  }
  if (!critics.all_finite()) throw NumericError("critic parameters became non-finite");
  return loss;
}

}  // namespace pbrl::sac
