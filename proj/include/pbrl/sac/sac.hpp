#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pbrl/autodiff/adam.hpp"
#include "pbrl/autodiff/tape.hpp"
#include "pbrl/core/csv.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/environment.hpp"
#include "pbrl/sac/critic.hpp"
#include "pbrl/sac/policy.hpp"
#include "pbrl/sac/replay_buffer.hpp"

namespace pbrl::sac {

/// Entropy temperature, held as log alpha.
class Temperature {
 public:
  Temperature() = default;
  Temperature(double initial_alpha, double target_entropy, ad::AdamConfig opt = ad::AdamConfig{3e-4},
              bool learnable = true)
      : log_alpha_(std::log(initial_alpha)), target_entropy_(target_entropy), learnable_(learnable), opt_(opt) {
    if (!(initial_alpha > 0.0) || !std::isfinite(initial_alpha)) throw ConfigError("initial alpha must be positive");
  }

  double alpha() const { return std::exp(log_alpha_); }
  double log_alpha() const { return log_alpha_; }
  double target_entropy() const { return target_entropy_; }
  bool learnable() const { return learnable_; }
  double& mutable_log_alpha() { return log_alpha_; }
  ad::AdamState& optimizer() { return opt_; }

 private:
  double log_alpha_ = std::log(0.2);
  double target_entropy_ = -1.0;
  bool learnable_ = true;
  ad::AdamState opt_{ad::AdamConfig{3e-4}};
};

/// d/d(log alpha) of -log alpha * mean(log pi + target entropy).
inline double temperature_gradient(const Temperature& temp, std::span<const double> log_probs) {
  if (log_probs.empty()) return 0.0;
  double m = 0.0;
  for (double v : log_probs) m += v;
  m /= double(log_probs.size());
  return -(m + temp.target_entropy());
}

/// One Adam step on log alpha; returns the new alpha.
inline double temperature_update(Temperature& temp, std::span<const double> log_probs) {
  if (!temp.learnable()) return temp.alpha();
  double g = temperature_gradient(temp, log_probs);
  temp.optimizer().step(std::span<double>(&temp.mutable_log_alpha(), 1), std::span<const double>(&g, 1));
  return temp.alpha();
}

/// Critic step toward the shared soft target. The target-action noise is
/// drawn from `rng` before anything else.
inline double critic_update(TwinCritic& critics, const Batch& batch, const GaussianPolicy& policy,
                            const Temperature& temp, double gamma, Rng& rng) {
  if (batch.size() == 0) throw UsageError("critic update needs a nonempty batch");
  ad::Tensor noise(batch.size(), policy.action_dim());
  rng.fill_normal(noise.span());
  const ad::Tensor y = soft_targets(critics, policy.params(), policy.action_dim(), batch, noise, temp.alpha(), gamma);
  return regress_critics(critics, batch, y);
}

struct ActorUpdateResult {
  double loss = 0.0;
  std::vector<double> log_probs;  // per batch row, before the step
};

/// Reparameterised step on mean(alpha log pi(a|s) - min Q(s, a)).
inline ActorUpdateResult actor_update(GaussianPolicy& policy, const TwinCritic& critics, const Batch& batch,
                                      double alpha, Rng& rng) {
  const std::size_t B = batch.size(), d = policy.action_dim();
  if (B == 0) throw UsageError("actor update needs a nonempty batch");
  ad::Tensor z(B, d);
  rng.fill_normal(z.span());
  ad::Tensor base(B, 1);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (std::size_t r = 0; r < B; ++r)
    for (std::size_t c = 0; c < d; ++c) base[r] += -0.5 * z(r, c) * z(r, c) - half_log_2pi;

  ad::Tape t;
  std::vector<ad::Var> leaves;
  const ad::Var s = t.constant(batch.states);
  const ad::Var out = policy.net().forward(t, s, true, &leaves, "pi");
  const ad::Var m = ad::slice_cols(out, 0, d);
  const ad::Var ls = ad::clamp(ad::slice_cols(out, d, d), kLogStdMin, kLogStdMax);
  const ad::Var u = m + ad::exp(ls) * t.constant(z);
  const ad::Var a = ad::tanh(u);
  // ln(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u))
  const ad::Var corr = ad::add_scalar(ad::neg(u) - ad::softplus(ad::scale(u, -2.0)), std::numbers::ln2) * 2.0;
  const ad::Var logp = t.constant(base) - ad::sum_rows(ls) - ad::sum_rows(corr);
  const ad::Var x = ad::concat_cols(s, a);
  const ad::Var q = ad::minimum(critics.q(0).forward(t, x, false), critics.q(1).forward(t, x, false));
  const ad::Var loss = ad::mean(alpha * logp - q);
  t.backward(loss);

  std::vector<ad::Tensor> grads;
  for (auto v : leaves) grads.push_back(t.grad(v));
  policy.optimizer().step(policy.params(), grads);
  if (!policy.net().all_finite()) throw NumericError("policy parameters became non-finite");
  return ActorUpdateResult{t.value(loss).item(), t.value(logp).data()};
}

struct SACConfig {
  std::vector<std::size_t> actor_hidden{256, 256};
  std::vector<std::size_t> critic_hidden{256, 256};
  double gamma = 0.99;
  double tau = 0.005;
  std::size_t batch_size = 256;
  std::size_t buffer_size = 1'000'000;
  double initial_alpha = 0.2;
  double alpha_lr = 3e-4;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  bool auto_alpha = true;
  double target_entropy = std::numeric_limits<double>::quiet_NaN();  // NaN: -action_dim
  std::size_t learning_starts = 5000;
  std::size_t train_freq = 2;
  std::size_t total_steps = 1'000'000;
  std::size_t max_episode_steps = 100;
  std::size_t eval_interval = 5000;
  std::size_t eval_episodes = 5;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    positive(initial_alpha, "initial_alpha");
    positive(alpha_lr, "alpha_lr");
    positive(actor_lr, "actor_lr");
    positive(critic_lr, "critic_lr");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (buffer_size < batch_size) throw ConfigError("buffer_size must be at least batch_size");
    if (train_freq == 0) throw ConfigError("train_freq must be positive");
    if (max_episode_steps == 0) throw ConfigError("max_episode_steps must be positive");
    if (eval_interval == 0) throw ConfigError("eval_interval must be positive");
    if (eval_episodes == 0) throw ConfigError("eval_episodes must be positive");
  }
};

struct UpdateStats {
  double critic_loss = std::numeric_limits<double>::quiet_NaN();
  double actor_loss = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
};

/// Policy, twin critics and temperature under one configuration.
class SACAgent {
 public:
  SACAgent(std::size_t state_dim, std::size_t action_dim, const SACConfig& cfg, Rng& init)
      : config(cfg),
        policy(state_dim, action_dim, cfg.actor_hidden, init, ad::AdamConfig{cfg.actor_lr}),
        critics(state_dim, action_dim, cfg.critic_hidden, init, ad::AdamConfig{cfg.critic_lr}),
        temperature(cfg.initial_alpha, std::isnan(cfg.target_entropy) ? -double(action_dim) : cfg.target_entropy,
                    ad::AdamConfig{cfg.alpha_lr}, cfg.auto_alpha) {
    cfg.validate();
  }

  /// Critic step, actor step, temperature step, target update.
  UpdateStats update(const Batch& batch, Rng& rng) {
    UpdateStats st;
    st.critic_loss = critic_update(critics, batch, policy, temperature, config.gamma, rng);
    auto ar = actor_update(policy, critics, batch, temperature.alpha(), rng);
    st.actor_loss = ar.loss;
    st.alpha = temperature_update(temperature, ar.log_probs);
    critics.soft_update(config.tau);
    return st;
  }

  SACConfig config;
  GaussianPolicy policy;
  TwinCritic critics;
  Temperature temperature;
};

/// Mean undiscounted return of deterministic episodes of `horizon` steps.
template <mdp::Environment Env>
double evaluate_policy(Env env, const GaussianPolicy& policy, const std::vector<ad::Tensor>& params,
                       std::size_t episodes, std::size_t horizon, Rng& rng) {
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<double> s = env.reset(rng);
    for (std::size_t t = 0; t < horizon; ++t) {
      const auto act = policy.act(params, s, rng, true);
      auto res = env.step(act.action, rng);
      total += res.reward;
      if (res.terminal) break;
      s = std::move(res.next_state);
    }
  }
  return total / double(episodes);
}

/// Uniform action in [-1, 1]^d, used before learning starts.
inline std::vector<double> random_action(std::size_t d, Rng& rng) {
  std::vector<double> a(d);
  for (auto& v : a) v = rng.uniform(-1.0, 1.0);
  return a;
}

struct SACMetricsRow {
  std::size_t step = 0;
  double episodic_return = 0.0;
  UpdateStats stats;
};

struct SACRunResult {
  std::vector<SACMetricsRow> rows;
  double final_return = 0.0;
};

inline std::vector<std::string> sac_metrics_header() { return {"step", "return", "critic_loss", "actor_loss", "alpha"}; }

/// Vanilla SAC. Streams: "init" networks, "env" dynamics, "act" behaviour
/// noise, "replay" batch draws, "update" gradient noise, "eval" evaluation.
template <mdp::Environment Env>
SACRunResult train_sac(const Env& proto, const SACConfig& cfg, std::uint64_t seed, std::ostream* csv = nullptr) {
  cfg.validate();
  const SeedTree seeds(seed);
  Rng init = seeds.stream("init"), env_rng = seeds.stream("env"), act_rng = seeds.stream("act"),
      replay_rng = seeds.stream("replay"), update_rng = seeds.stream("update");
  Env env = proto;
  SACAgent agent(env.state_dim(), env.action_dim(), cfg, init);
  ReplayBuffer buffer(std::min(cfg.buffer_size, std::max<std::size_t>(cfg.total_steps, cfg.batch_size)),
                      env.state_dim(), env.action_dim());
  std::optional<CsvWriter> writer;
  if (csv) writer.emplace(*csv, sac_metrics_header());

  SACRunResult result;
  UpdateStats last;
  std::vector<double> s = env.reset(env_rng);
  std::size_t episode_len = 0, evals = 0;
  for (std::size_t t = 1; t <= cfg.total_steps; ++t) {
    std::vector<double> a = t <= cfg.learning_starts ? random_action(env.action_dim(), act_rng)
                                                     : agent.policy.act(s, act_rng).action;
    auto res = env.step(a, env_rng);
    buffer.add(s, a, res.reward, res.next_state, res.terminal);
    ++episode_len;
    if (res.terminal || episode_len >= cfg.max_episode_steps) {
      s = env.reset(env_rng);
      episode_len = 0;
    } else {
      s = std::move(res.next_state);
    }
    if (t >= cfg.learning_starts && t % cfg.train_freq == 0 && buffer.size() >= cfg.batch_size)
      last = agent.update(buffer.sample(cfg.batch_size, replay_rng), update_rng);

    if (t % cfg.eval_interval == 0) {
      Rng eval_rng = seeds.stream("eval", evals++);
      SACMetricsRow row{t, evaluate_policy(proto, agent.policy, agent.policy.params(), cfg.eval_episodes,
                                           cfg.max_episode_steps, eval_rng),
                        last};
      row.stats.alpha = agent.temperature.alpha();
      if (writer)
        writer->row({std::to_string(row.step), format_double(row.episodic_return), format_double(row.stats.critic_loss),
                     format_double(row.stats.actor_loss), format_double(row.stats.alpha)});
      result.rows.push_back(row);
    }
  }
  if (!result.rows.empty() && result.rows.back().step == cfg.total_steps) {
    result.final_return = result.rows.back().episodic_return;
  } else {
    Rng eval_rng = seeds.stream("eval", evals);
    result.final_return = evaluate_policy(proto, agent.policy, agent.policy.params(), cfg.eval_episodes,
                                          cfg.max_episode_steps, eval_rng);
  }
  return result;
}

}  // namespace pbrl::sac
