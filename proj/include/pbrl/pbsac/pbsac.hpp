#pragma once

// PB-SAC: SAC whose actor is the mean of a diagonal Gaussian posterior over
// its flattened parameters. Every pb_update_freq steps the posterior is
// refined on fresh rollouts against the PAC-Bayes-kappa objective, a
// certificate is emitted on held-out rollouts, and the critics adapt to
// the new posterior while the actor is frozen.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pbrl/autodiff/adam.hpp"
#include "pbrl/certificate/bound.hpp"
#include "pbrl/core/csv.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/environment.hpp"
#include "pbrl/mdp/returns.hpp"
#include "pbrl/mdp/rollout.hpp"
#include "pbrl/mdp/trajectory.hpp"
#include "pbrl/mixing/autocorrelation.hpp"
#include "pbrl/mixing/mixing_time.hpp"
#include "pbrl/pbsac/config.hpp"
#include "pbrl/posterior/diag_gaussian.hpp"
#include "pbrl/posterior/flatten.hpp"
#include "pbrl/sac/checkpoint.hpp"
#include "pbrl/sac/sac.hpp"

namespace pbrl::pbsac {

enum class Phase { normal, critic_adaptation };

inline const char* to_string(Phase p) { return p == Phase::normal ? "normal" : "critic_adaptation"; }

struct TrainerState {
  Phase phase = Phase::normal;
  std::size_t step = 0;
  posterior::ShapeSpec shapes;
  posterior::DiagGaussian posterior;
  posterior::DiagGaussian prior;
  posterior::PriorSchedule schedule;
  std::optional<mixing::MixingEstimate> tau;
  double kappa = 1.0;
  std::optional<cert::Certificate> certificate;
  std::size_t adaptation_done = 0;
  std::size_t pb_cycles = 0;
};

/// Posterior and prior both start at N(actor parameters, init_std^2).
inline TrainerState make_trainer_state(const sac::GaussianPolicy& policy, const PBSACConfig& cfg) {
  TrainerState st;
  st.shapes = posterior::shape_spec(policy.params());
  st.posterior = posterior::DiagGaussian(posterior::flatten(policy.params()), cfg.init_std);
  st.prior = st.posterior;
  st.schedule.decay = cfg.prior_decay;
  st.schedule.decay_slope = cfg.prior_decay_slope;
  st.schedule.floor = cfg.prior_decay_floor;
  st.schedule.update_period = cfg.pb_reset_freq;
  return st;
}

/// Writes the posterior mean into the actor.
inline void load_policy_params(sac::GaussianPolicy& policy, const posterior::DiagGaussian& rho) {
  posterior::assign(policy.params(), rho.mean());
}

/// mean + std * z for a fixed standard normal draw z.
inline std::vector<double> perturb(const posterior::DiagGaussian& rho, std::span<const double> z) {
  std::vector<double> theta(rho.dim());
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = rho.mean()[i] + rho.std_at(i) * z[i];
  return theta;
}

struct ExploreChoice {
  std::vector<double> action;
  std::size_t candidate = 0;  // 0 is the posterior mean
  double q = 0.0;
};

/// Candidate 0 is the posterior mean, candidates 1..n_samples are draws
/// from the posterior. Each proposes its deterministic action at `state`;
/// the one with the largest min(Q1, Q2) wins, ties to the lowest index.
inline ExploreChoice posterior_guided_explore(std::span<const double> state, const posterior::DiagGaussian& rho,
                                              const posterior::ShapeSpec& shapes, std::size_t action_dim,
                                              const sac::TwinCritic& critics, std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw UsageError("posterior-guided exploration needs at least one sample");
  const std::size_t n = n_samples + 1;
  const ad::Tensor s = ad::Tensor::row(state);
  ad::Tensor states(n, state.size()), actions(n, action_dim);
  for (std::size_t k = 0; k < n; ++k) {
    const std::vector<double> theta = k == 0 ? rho.mean() : rho.sample(rng);
    const auto h = sac::GaussianPolicy::head(posterior::unflatten(theta, shapes), s, action_dim);
    for (std::size_t c = 0; c < state.size(); ++c) states(k, c) = state[c];
    for (std::size_t c = 0; c < action_dim; ++c) actions(k, c) = std::tanh(h.mean[c]);
  }
  const ad::Tensor q = critics.min_q(states, actions);
  ExploreChoice best;
  best.q = q[0];
  for (std::size_t k = 1; k < n; ++k)
    if (q[k] > best.q) {
      best.q = q[k];
      best.candidate = k;
    }
  best.action.assign(actions.ptr() + best.candidate * action_dim, actions.ptr() + (best.candidate + 1) * action_dim);
  return best;
}

/// Sum over steps of log pi_target(a_t|s_t) - behaviour log-prob.
inline double log_importance_ratio(const mdp::Trajectory& tr, const std::vector<ad::Tensor>& target_params,
                                   std::size_t action_dim) {
  const ad::Tensor states(tr.size(), tr.state_dim(), tr.states());
  const auto h = sac::GaussianPolicy::head(target_params, states, action_dim);
  const auto blp = tr.behavior_log_probs();
  double lr = 0.0;
  for (std::size_t t = 0; t < tr.size(); ++t)
    lr += sac::GaussianPolicy::log_prob_of_action(h, t, tr.action_at(t)) - blp[t];
  return lr;
}

/// w * G with w = exp(log ratio) clamped to [1/clip, clip]. The clamp is
/// applied to the log ratio, which gives the same value without overflow.
inline double importance_sampled_return(const mdp::Trajectory& tr, const std::vector<ad::Tensor>& target_params,
                                        std::size_t action_dim, double gamma, double clip,
                                        std::size_t trajectory_id = 0) {
  if (!(clip >= 1.0)) throw UsageError("importance weight clip must be at least 1");
  const double lr = log_importance_ratio(tr, target_params, action_dim);
  if (!std::isfinite(lr)) throw NumericError("non-finite importance weight for trajectory " + std::to_string(trajectory_id));
  const double lc = std::log(clip);
  return std::exp(std::clamp(lr, -lc, lc)) * mdp::discounted_return(tr, gamma);
}

/// A split of fresh rollouts flattened for batched importance sampling.
class ISDataset {
 public:
  ISDataset(std::vector<const mdp::Trajectory*> trajs, double gamma, double clip) : clip_(clip) {
    if (trajs.empty()) throw UsageError("importance sampling over an empty split");
    const std::size_t sd = trajs.front()->state_dim();
    action_dim_ = trajs.front()->action_dim();
    std::vector<double> states;
    for (const auto* tr : trajs) {
      offsets_.push_back(behavior_.size());
      states.insert(states.end(), tr->states().begin(), tr->states().end());
      actions_.insert(actions_.end(), tr->actions().begin(), tr->actions().end());
      behavior_.insert(behavior_.end(), tr->behavior_log_probs().begin(), tr->behavior_log_probs().end());
      returns_.push_back(mdp::discounted_return(*tr, gamma));
    }
    offsets_.push_back(behavior_.size());
    states_ = ad::Tensor(behavior_.size(), sd, std::move(states));
  }

  std::size_t count() const { return returns_.size(); }
  std::span<const double> plain_returns() const { return returns_; }

  /// Mean over trajectories of the clipped importance-sampled return.
  double mean_return(const std::vector<ad::Tensor>& target_params) const {
    const auto h = sac::GaussianPolicy::head(target_params, states_, action_dim_);
    const double lc = std::log(clip_);
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < offsets_.size(); ++j) {
      double lr = 0.0;
      for (std::size_t t = offsets_[j]; t < offsets_[j + 1]; ++t)
        lr += sac::GaussianPolicy::log_prob_of_action(
                  h, t, std::span<const double>(actions_).subspan(t * action_dim_, action_dim_)) -
              behavior_[t];
      if (!std::isfinite(lr)) throw NumericError("non-finite importance weight for trajectory " + std::to_string(j));
      total += std::exp(std::clamp(lr, -lc, lc)) * returns_[j];
    }
    return total / double(count());
  }

 private:
  double clip_;
  std::size_t action_dim_ = 0;
  ad::Tensor states_;
  std::vector<double> actions_, behavior_, returns_;
  std::vector<std::size_t> offsets_;
};

/// Behaviour policy for fresh rollouts: the stochastic policy at fixed
/// parameters, recording log-probs through the same stored-action route
/// used when importance weights are formed.
struct RecordingPolicy {
  const std::vector<ad::Tensor>* params;
  std::size_t action_dim;

  mdp::ActionSample operator()(std::span<const double> state, Rng& rng) const {
    const auto h = sac::GaussianPolicy::head(*params, ad::Tensor::row(state), action_dim);
    mdp::ActionSample out;
    out.action.resize(action_dim);
    for (std::size_t i = 0; i < action_dim; ++i)
      out.action[i] = std::tanh(h.mean[i] + std::exp(h.log_std[i]) * rng.normal());
    out.log_prob = sac::GaussianPolicy::log_prob_of_action(h, 0, out.action);
    return out;
  }
};

/// rollout_trajectories fresh rollouts of rollout_steps under the posterior
/// mean; trajectory j draws from its own stream so the set does not depend
/// on how collection is scheduled.
template <mdp::Environment Env>
mdp::TrajectoryDataset collect_fresh_rollouts(const Env& proto, const posterior::DiagGaussian& rho,
                                              const posterior::ShapeSpec& shapes, std::size_t action_dim,
                                              const PBSACConfig& cfg, const SeedTree& seeds) {
  const auto params = posterior::unflatten(rho.mean(), shapes);
  RecordingPolicy pol{&params, action_dim};
  mdp::TrajectoryDataset ds;
  ds.behavior_policy_id = "posterior-mean";
  for (std::size_t j = 0; j < cfg.rollout_trajectories; ++j) {
    Env env = proto;
    Rng rng = seeds.stream("traj", j);
    ds.trajectories.push_back(mdp::rollout(env, pol, cfg.rollout_steps, rng));
  }
  return ds;
}

/// Even indices train, odd indices test.
inline std::pair<std::vector<const mdp::Trajectory*>, std::vector<const mdp::Trajectory*>> split_alternating(
    const mdp::TrajectoryDataset& ds) {
  std::pair<std::vector<const mdp::Trajectory*>, std::vector<const mdp::Trajectory*>> out;
  for (std::size_t j = 0; j < ds.count(); ++j) (j % 2 == 0 ? out.first : out.second).push_back(&ds.trajectories[j]);
  return out;
}

inline mixing::MixingEstimate estimate_tau(const mdp::TrajectoryDataset& ds, double threshold) {
  std::vector<std::span<const double>> segments;
  for (const auto& tr : ds.trajectories) segments.push_back(tr.rewards());
  return mixing::autocorrelation_tau(std::move(segments), threshold);
}

/// Posterior-averaged empirical return on a split, from cert_samples draws.
inline double posterior_empirical_return(const ISDataset& split, const posterior::DiagGaussian& rho,
                                         const posterior::ShapeSpec& shapes, std::size_t samples, Rng& rng) {
  double total = 0.0;
  for (std::size_t k = 0; k < samples; ++k) total += split.mean_return(posterior::unflatten(rho.sample(rng), shapes));
  return total / double(samples);
}

/// Halvings tried by the posterior step before it is skipped.
inline constexpr std::size_t kLineSearchSteps = 8;

struct PBUpdateReport {
  bool aborted = false;
  std::string incident;
  mixing::MixingEstimate tau_estimate;
  std::vector<double> objective_trace;  // before the first epoch, then after each epoch
  std::optional<cert::Certificate> certificate;
  double kappa = 0.0;
};

namespace detail {

template <mdp::Environment Env>
struct FreshData {
  mdp::TrajectoryDataset rollouts;
  mixing::MixingEstimate tau_estimate;
};

/// Collects rollouts and folds the new tau estimate into the running one.
template <mdp::Environment Env>
FreshData<Env> refresh(TrainerState& st, const Env& proto, std::size_t action_dim, const PBSACConfig& cfg,
                       const SeedTree& seeds) {
  FreshData<Env> f;
  f.rollouts = collect_fresh_rollouts(proto, st.posterior, st.shapes, action_dim, cfg, seeds);
  f.tau_estimate = estimate_tau(f.rollouts, cfg.autocorrelation_threshold);
  st.tau = st.tau ? mixing::conservative_tau(*st.tau, f.tau_estimate) : f.tau_estimate;
  return f;
}

inline cert::Certificate certify(const TrainerState& st, const ISDataset& test, double r_max, const PBSACConfig& cfg,
                                 Rng& rng) {
  cert::CertificateInputs in;
  in.r_max = r_max;
  in.gamma = cfg.sac.gamma;
  in.horizon = cert::Horizon::finite(cfg.rollout_steps);
  in.n_trajectories = test.count();
  in.tau_min = st.tau->tau_min;
  in.kl = posterior::kl_diag_gaussians(st.posterior, st.prior);
  in.delta = cfg.delta;
  const double emp = posterior_empirical_return(test, st.posterior, st.shapes, cfg.cert_samples, rng);
  return cert::value_lower_bound(emp, in);
}

}  // namespace detail

/// Certificate of the current posterior on fresh rollouts, without
/// optimisation or a phase change. Used for the untrained initial posterior.
template <mdp::Environment Env>
cert::Certificate certify_current(TrainerState& st, const Env& proto, std::size_t action_dim, const PBSACConfig& cfg,
                                  const SeedTree& seeds) {
  auto fresh = detail::refresh(st, proto, action_dim, cfg, seeds);
  auto [train, test] = split_alternating(fresh.rollouts);
  ISDataset test_set(test, cfg.sac.gamma, cfg.is_weight_clip);
  Rng rng = seeds.stream("cert");
  st.certificate = detail::certify(st, test_set, proto.r_max(), cfg, rng);
  st.kappa = st.certificate->kappa_star;
  return *st.certificate;
}

/// One PAC-Bayes cycle: fresh rollouts, tau re-estimate, alternating
/// optimisation of (mean, std) and kappa on the train split, certificate on
/// the test split, actor sync, and the switch to critic adaptation.
template <mdp::Environment Env>
PBUpdateReport pac_bayes_update(TrainerState& st, sac::GaussianPolicy& actor, const Env& proto,
                                const PBSACConfig& cfg, const SeedTree& seeds) {
  if (st.phase != Phase::normal) throw UsageError("PAC-Bayes update requested during critic adaptation");
  PBUpdateReport rep;
  const std::size_t d = actor.action_dim();
  auto fresh = detail::refresh(st, proto, d, cfg, seeds);
  rep.tau_estimate = fresh.tau_estimate;
  auto [train, test] = split_alternating(fresh.rollouts);
  const ISDataset train_set(train, cfg.sac.gamma, cfg.is_weight_clip);
  const ISDataset test_set(test, cfg.sac.gamma, cfg.is_weight_clip);

  const double tau = st.tau->tau_min;
  const double cn = cert::c_norm_sq(proto.r_max(), cfg.sac.gamma, cert::Horizon::finite(cfg.rollout_steps),
                                    test_set.count());
  const posterior::DiagGaussian saved = st.posterior;
  const double saved_kappa = st.kappa;

  // Common random numbers across epochs: theta_k = mean + std * z_k.
  Rng noise = seeds.stream("pb_noise");
  std::vector<std::vector<double>> z(cfg.pb_samples, std::vector<double>(st.posterior.dim()));
  for (auto& zk : z) noise.fill_normal(zk);

  auto evaluate = [&](std::vector<std::vector<double>>& thetas, std::vector<double>& returns) {
    for (std::size_t k = 0; k < z.size(); ++k) {
      thetas[k] = perturb(st.posterior, z[k]);
      returns[k] = train_set.mean_return(posterior::unflatten(thetas[k], st.shapes));
    }
    double m = 0.0;
    for (double r : returns) m += r;
    return -m / double(returns.size());
  };
  // The KL term carries ln(2/delta) so that the kappa step below, which
  // sets kappa to its closed-form minimiser, also descends this function.
  auto objective = [&](double loss, double kl) {
    return cert::kappa_objective(loss, cfg.kl_coefficient * kl, st.kappa, cn, tau, cfg.delta, true);
  };
  auto kl_now = [&](const std::string& where) {
    const double kl = posterior::kl_diag_gaussians(st.posterior, st.prior);
    if (!std::isfinite(kl)) throw NumericError("KL is not finite " + where);
    return kl;
  };

  std::vector<std::vector<double>> thetas(z.size());
  std::vector<double> returns(z.size());
  try {
    double loss = evaluate(thetas, returns);
    double kl = kl_now("before the first epoch");
    double current = objective(loss, kl);
    rep.objective_trace.push_back(current);
    for (std::size_t epoch = 0; epoch < cfg.pb_epochs; ++epoch) {
      // Posterior step at fixed kappa. The REINFORCE + KL gradient is
      // preconditioned by the inverse Fisher information (std^2 for the
      // mean, 1/2 for log std); the step is halved until the objective on
      // the common draws decreases, and dropped if it never does.
      const auto g = posterior::reinforce_gradient(st.posterior, thetas, returns, true);
      const auto gk = posterior::kl_gradient(st.posterior, st.prior);
      const double w = cfg.kl_coefficient / st.kappa;
      const std::size_t n = st.posterior.dim();
      std::vector<double> dm(n), ds(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double sd = st.posterior.std_at(i);
        dm[i] = -sd * sd * (-g.mean[i] + w * gk.mean[i]);
        ds[i] = -0.5 * sd * (-g.sd[i] + w * gk.sd[i]);
      }
      const posterior::DiagGaussian start = st.posterior;
      const auto start_thetas = thetas;
      const auto start_returns = returns;
      bool accepted = false;
      double step = cfg.pb_learning_rate;
      for (std::size_t attempt = 0; attempt < kLineSearchSteps && !accepted; ++attempt, step *= 0.5) {
        st.posterior = start;
        for (std::size_t i = 0; i < n; ++i) {
          st.posterior.mutable_mean()[i] += step * dm[i];
          st.posterior.mutable_log_std()[i] += step * ds[i];
        }
        const double kl_c = kl_now("during epoch " + std::to_string(epoch));
        const double loss_c = evaluate(thetas, returns);
        if (objective(loss_c, kl_c) < current) {
          accepted = true;
          loss = loss_c;
          kl = kl_c;
        }
      }
      if (!accepted) {
        st.posterior = start;
        thetas = start_thetas;
        returns = start_returns;
      }

      // Kappa step at fixed posterior.
      const double next_kappa = cert::kappa_star(kl, cfg.delta, cn, tau);
      const bool stalled = !accepted && next_kappa == st.kappa;
      st.kappa = next_kappa;
      current = objective(loss, kl);
      rep.objective_trace.push_back(current);
      // Nothing moved, so every later epoch would repeat this one exactly.
      if (stalled) {
        rep.objective_trace.resize(cfg.pb_epochs + 1, current);
        break;
      }
    }
  } catch (const NumericError& e) {
    st.posterior = saved;
    st.kappa = saved_kappa;
    rep.aborted = true;
    rep.incident = std::string("PAC-Bayes update aborted, posterior restored: ") + e.what();
    return rep;
  }

  Rng rng = seeds.stream("cert");
  st.certificate = detail::certify(st, test_set, proto.r_max(), cfg, rng);
  rep.certificate = st.certificate;
  rep.kappa = st.kappa;
  load_policy_params(actor, st.posterior);
  st.phase = Phase::critic_adaptation;
  st.adaptation_done = 0;
  ++st.pb_cycles;
  return rep;
}

/// Mean over posterior draws of the soft targets, with one shared target
/// noise. Per-draw targets are appended to `per_sample` when given.
inline ad::Tensor averaged_soft_targets(const sac::TwinCritic& critics, const TrainerState& st,
                                        std::size_t action_dim, const sac::Batch& batch, const ad::Tensor& noise,
                                        double alpha, double gamma, std::size_t n_samples, Rng& rng,
                                        std::vector<ad::Tensor>* per_sample = nullptr) {
  if (n_samples == 0) throw UsageError("critic adaptation needs at least one posterior sample");
  ad::Tensor sum(batch.size(), 1);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const auto params = posterior::unflatten(st.posterior.sample(rng), st.shapes);
    ad::Tensor y = sac::soft_targets(critics, params, action_dim, batch, noise, alpha, gamma);
    sum += y;
    if (per_sample) per_sample->push_back(std::move(y));
  }
  for (auto& v : sum.data()) v /= double(n_samples);
  return sum;
}

/// Critic regression toward targets averaged over adaptation_samples
/// posterior draws. The actor is untouched. Ends the phase after
/// adaptation_steps calls.
inline double critic_adaptation_step(TrainerState& st, sac::TwinCritic& critics, std::size_t action_dim,
                                     const sac::Batch& batch, double alpha, const PBSACConfig& cfg, Rng& rng) {
  if (st.phase != Phase::critic_adaptation) throw UsageError("critic adaptation outside the adaptation phase");
  ad::Tensor noise(batch.size(), action_dim);
  rng.fill_normal(noise.span());
  const ad::Tensor y =
      averaged_soft_targets(critics, st, action_dim, batch, noise, alpha, cfg.sac.gamma, cfg.adaptation_samples, rng);
  const double loss = sac::regress_critics(critics, batch, y);
  if (++st.adaptation_done >= cfg.adaptation_steps) st.phase = Phase::normal;
  return loss;
}

struct PBMetricsRow {
  std::size_t step = 0;
  double episodic_return = 0.0;
  double empirical_discounted_return = 0.0;
  double certified_lower_bound = 0.0;
  double kl = 0.0;
  double tau_min = 0.0;
  double kappa = 0.0;
  Phase phase = Phase::normal;
};

struct CertificateRecord {
  std::size_t step = 0;
  double kappa = 0.0;
  cert::Certificate certificate;
};

struct PBSACRunResult {
  std::vector<PBMetricsRow> rows;
  std::vector<CertificateRecord> certificates;  // the initial one first
  std::vector<std::vector<double>> objective_traces;
  std::vector<double> tau_series;  // running tau_min after each refresh
  std::vector<std::string> incidents;
  double final_return = 0.0;
  TrainerState state;
};

struct TrainOutputs {
  std::ostream* metrics = nullptr;
  std::ostream* certificates = nullptr;
  std::ostream* log = nullptr;
  std::string checkpoint_dir;
};

inline std::vector<std::string> metrics_header() {
  return {"step", "episodic_return", "empirical_discounted_return", "certified_lower_bound",
          "kl", "tau_min", "kappa", "phase"};
}

inline std::vector<std::string> certificates_header() {
  return {"step", "kl", "delta", "tau_min", "T", "H", "gamma", "r_max", "kappa", "kappa_star",
          "deviation_bound", "empirical_return", "certified_lower_bound"};
}

inline std::vector<std::string> certificate_cells(const CertificateRecord& r) {
  const auto& c = r.certificate;
  const auto& in = c.inputs;
  return {std::to_string(r.step),          format_double(in.kl),
          format_double(in.delta),         format_double(in.tau_min),
          std::to_string(in.n_trajectories), in.horizon.to_string(),
          format_double(in.gamma),         format_double(in.r_max),
          format_double(r.kappa),          format_double(c.kappa_star),
          format_double(c.deviation_bound), format_double(c.empirical_return),
          format_double(c.certified_lower_bound)};
}

/// posterior.txt, prior.txt, actor.txt, q1.txt, q2.txt, q1_target.txt, q2_target.txt.
inline void write_checkpoint(const std::string& dir, const TrainerState& st, const sac::SACAgent& agent) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path p(dir);
  posterior::save_gaussian((p / "posterior.txt").string(),
                           posterior::GaussianCheckpoint{st.posterior, st.shapes, st.schedule.decay, st.step});
  posterior::save_gaussian((p / "prior.txt").string(),
                           posterior::GaussianCheckpoint{st.prior, st.shapes, st.schedule.decay, st.step});
  sac::save_params((p / "actor.txt").string(), "actor", agent.policy.params());
  sac::save_params((p / "q1.txt").string(), "q1", agent.critics.q(0).params());
  sac::save_params((p / "q2.txt").string(), "q2", agent.critics.q(1).params());
  sac::save_params((p / "q1_target.txt").string(), "q1_target", agent.critics.target(0).params());
  sac::save_params((p / "q2_target.txt").string(), "q2_target", agent.critics.target(1).params());
}

/// Full PB-SAC loop. Shares stream labels with sac::train_sac ("init",
/// "env", "act", "replay", "update", "eval"), so the two are seed-paired.
template <mdp::Environment Env>
PBSACRunResult train_pbsac(const Env& proto, const PBSACConfig& cfg, std::uint64_t seed,
                           const TrainOutputs& out = {}) {
  cfg.validate();
  const auto& sc = cfg.sac;
  const SeedTree seeds(seed);
  Rng init = seeds.stream("init"), env_rng = seeds.stream("env"), act_rng = seeds.stream("act"),
      replay_rng = seeds.stream("replay"), update_rng = seeds.stream("update"), explore_rng = seeds.stream("explore"),
      adapt_rng = seeds.stream("adapt");
  Env env = proto;
  const std::size_t d = env.action_dim();
  sac::SACAgent agent(env.state_dim(), d, sc, init);
  sac::ReplayBuffer buffer(std::min(sc.buffer_size, std::max<std::size_t>(sc.total_steps, sc.batch_size)),
                           env.state_dim(), d);

  std::optional<CsvWriter> metrics, certs;
  if (out.metrics) metrics.emplace(*out.metrics, metrics_header());
  if (out.certificates) certs.emplace(*out.certificates, certificates_header());

  PBSACRunResult res;
  TrainerState& st = res.state;
  st = make_trainer_state(agent.policy, cfg);
  if (sc.total_steps == 0) return res;

  auto emit = [&](const PBUpdateReport* rep) {
    CertificateRecord rec{st.step, st.kappa, *st.certificate};
    if (certs) certs->row(certificate_cells(rec));
    res.certificates.push_back(rec);
    res.tau_series.push_back(st.tau->tau_min);
    if (rep) res.objective_traces.push_back(rep->objective_trace);
  };
  auto incident = [&](const std::string& msg) {
    res.incidents.push_back("step " + std::to_string(st.step) + ": " + msg);
    if (out.log) *out.log << res.incidents.back() << '\n';
  };

  std::size_t evals = 0;
  try {
    certify_current(st, proto, d, cfg, seeds.child("pb", 0));
    emit(nullptr);

    std::vector<double> s = env.reset(env_rng);
    std::size_t episode_len = 0;
    for (std::size_t t = 1; t <= sc.total_steps; ++t) {
      st.step = t;
      if (st.phase == Phase::normal) {
        std::vector<double> a;
        if (t <= sc.learning_starts) {
          a = sac::random_action(d, act_rng);
        } else if (cfg.explore_epsilon > 0.0 && explore_rng.uniform() < cfg.explore_epsilon) {
          a = posterior_guided_explore(s, st.posterior, st.shapes, d, agent.critics, cfg.explore_samples, explore_rng)
                  .action;
        } else {
          a = agent.policy.act(s, act_rng).action;
        }
        auto r = env.step(a, env_rng);
        buffer.add(s, a, r.reward, r.next_state, r.terminal);
        if (r.terminal || ++episode_len >= sc.max_episode_steps) {
          s = env.reset(env_rng);
          episode_len = 0;
        } else {
          s = std::move(r.next_state);
        }
        if (t >= sc.learning_starts && t % sc.train_freq == 0 && buffer.size() >= sc.batch_size) {
          agent.update(buffer.sample(sc.batch_size, replay_rng), update_rng);
          st.posterior.mutable_mean() = posterior::flatten(agent.policy.params());
        }
      } else {
        if (buffer.size() >= sc.batch_size) {
          critic_adaptation_step(st, agent.critics, d, buffer.sample(sc.batch_size, replay_rng),
                                 agent.temperature.alpha(), cfg, adapt_rng);
          agent.critics.soft_update(sc.tau);
        } else if (++st.adaptation_done >= cfg.adaptation_steps) {
          st.phase = Phase::normal;
        }
      }

      const bool reset_due = t % cfg.pb_reset_freq == 0;
      if (reset_due && cfg.reset_before_update) st.prior = posterior::prior_update(st.prior, st.posterior, st.schedule);
      if (t % cfg.pb_update_freq == 0) {
        if (st.phase != Phase::normal) {
          incident("PAC-Bayes update skipped: critic adaptation still running");
        } else {
          auto rep = pac_bayes_update(st, agent.policy, proto, cfg, seeds.child("pb", st.pb_cycles + 1));
          if (rep.aborted)
            incident(rep.incident);
          else
            emit(&rep);
        }
      }
      if (reset_due && !cfg.reset_before_update)
        st.prior = posterior::prior_update(st.prior, st.posterior, st.schedule);

      if (t % sc.eval_interval == 0) {
        Rng eval_rng = seeds.stream("eval", evals++);
        PBMetricsRow row;
        row.step = t;
        row.episodic_return = sac::evaluate_policy(proto, agent.policy, agent.policy.params(), sc.eval_episodes,
                                                   sc.max_episode_steps, eval_rng);
        row.empirical_discounted_return = st.certificate->empirical_return;
        row.certified_lower_bound = st.certificate->certified_lower_bound;
        row.kl = st.certificate->inputs.kl;
        row.tau_min = st.certificate->inputs.tau_min;
        row.kappa = st.kappa;
        row.phase = st.phase;
        if (metrics)
          metrics->row({std::to_string(row.step), format_double(row.episodic_return),
                        format_double(row.empirical_discounted_return), format_double(row.certified_lower_bound),
                        format_double(row.kl), format_double(row.tau_min), format_double(row.kappa),
                        to_string(row.phase)});
        res.rows.push_back(row);
      }
    }
  } catch (const std::exception& e) {
    if (!out.checkpoint_dir.empty()) write_checkpoint(out.checkpoint_dir, st, agent);
    if (out.log) *out.log << "step " << st.step << ": aborted: " << e.what() << '\n';
    throw;
  }

  if (!res.rows.empty() && res.rows.back().step == sc.total_steps) {
    res.final_return = res.rows.back().episodic_return;
  } else {
    Rng eval_rng = seeds.stream("eval", evals);
    res.final_return = sac::evaluate_policy(proto, agent.policy, agent.policy.params(), sc.eval_episodes,
                                            sc.max_episode_steps, eval_rng);
  }
  if (!out.checkpoint_dir.empty()) write_checkpoint(out.checkpoint_dir, st, agent);
  return res;
}

}  // namespace pbrl::pbsac
