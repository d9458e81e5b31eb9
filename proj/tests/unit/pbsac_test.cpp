#include <gtest/gtest.h>

#include <sstream>

#include "common/oracles.hpp"

using namespace pbrl;
using namespace pbrl::pbsac;

namespace {

PBSACConfig tiny_config() {
  PBSACConfig c;
  c.sac.actor_hidden = {8};
  c.sac.critic_hidden = {8};
  c.sac.batch_size = 16;
  c.sac.learning_starts = 100;
  c.sac.total_steps = 600;
  c.sac.eval_interval = 200;
  c.sac.eval_episodes = 2;
  c.sac.max_episode_steps = 20;
  c.pb_update_freq = 200;
  c.pb_reset_freq = 200;
  c.pb_epochs = 3;
  c.pb_samples = 4;
  c.cert_samples = 2;
  c.adaptation_samples = 4;
  c.adaptation_steps = 5;
  c.explore_samples = 4;
  c.rollout_trajectories = 8;
  c.rollout_steps = 10;
  return c;
}

struct Fixture {
  mdp::PointMass2D env;
  PBSACConfig cfg = tiny_config();
  Rng init{3};
  sac::GaussianPolicy actor{env.state_dim(), env.action_dim(), cfg.sac.actor_hidden, init};
  sac::TwinCritic critics{env.state_dim(), env.action_dim(), cfg.sac.critic_hidden, init};
  TrainerState st = make_trainer_state(actor, cfg);
};

sac::Batch random_batch(std::size_t B, std::size_t sd, std::size_t ad, Rng& rng) {
  sac::Batch b{ad::Tensor(B, sd), ad::Tensor(B, ad), ad::Tensor(B, 1), ad::Tensor(B, sd), ad::Tensor(B, 1)};
  for (auto* t : {&b.states, &b.actions, &b.rewards, &b.next_states})
    for (auto& v : t->data()) v = rng.uniform(-1.0, 1.0);
  return b;
}

TrainOutputs outputs(std::ostream& metrics, std::ostream& certificates) {
  TrainOutputs o;
  o.metrics = &metrics;
  o.certificates = &certificates;
  return o;
}

}  // namespace

TEST(Config, DumpParsesBackToTheSameConfig) {
  auto c = tiny_config();
  c.sac.actor_hidden = {5, 7};
  c.delta = 0.05;
  c.reset_before_update = false;
  PBSACConfig back;
  std::istringstream is(dump_config(c));
  apply_config(back, is);
  EXPECT_EQ(dump_config(back), dump_config(c));
}

TEST(Config, ParsesCommentsAndRejectsBadLines) {
  PBSACConfig c;
  std::istringstream ok("# desk run\n pb_epochs = 4  # fewer\n\nactor_hidden = 16, 16\n");
  apply_config(c, ok);
  EXPECT_EQ(c.pb_epochs, 4u);
  EXPECT_EQ(c.sac.actor_hidden, (std::vector<std::size_t>{16, 16}));
  try {
    set_field(c, "pb_epoch", "3");
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("pb_epoch"), std::string::npos);
  }
  EXPECT_THROW(set_field(c, "delta", "0.1x"), ConfigError);
  EXPECT_THROW(set_field(c, "pb_samples", "-2"), ConfigError);
  EXPECT_THROW(set_field(c, "auto_alpha", "yes"), ConfigError);
  std::istringstream bad("pb_epochs 4\n");
  EXPECT_THROW(apply_config(c, bad), ConfigError);
  c.pb_samples = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_NO_THROW(desk_config().validate());
}

TEST(Explore, PicksTheLargestCriticValue) {
  Fixture f;
  f.st.posterior = posterior::DiagGaussian(f.st.posterior.mean(), 0.5);
  const std::vector<double> state{0.3, -0.2};
  Rng a(5), b(5);
  const auto x = posterior_guided_explore(state, f.st.posterior, f.st.shapes, 2, f.critics, 6, a);
  const auto y = posterior_guided_explore(state, f.st.posterior, f.st.shapes, 2, f.critics, 6, b);
  EXPECT_EQ(x.action, y.action);
  EXPECT_EQ(x.candidate, y.candidate);
  const auto q = f.critics.min_q(ad::Tensor::row(state), ad::Tensor::row(x.action));
  EXPECT_NEAR(q[0], x.q, 1e-12);
  const auto mean_head = sac::GaussianPolicy::head(posterior::unflatten(f.st.posterior.mean(), f.st.shapes),
                                                   ad::Tensor::row(state), 2);
  const std::vector<double> mean_action{std::tanh(mean_head.mean[0]), std::tanh(mean_head.mean[1])};
  EXPECT_GE(x.q, f.critics.min_q(ad::Tensor::row(state), ad::Tensor::row(mean_action))[0] - 1e-12);
  EXPECT_THROW(posterior_guided_explore(state, f.st.posterior, f.st.shapes, 2, f.critics, 0, a), UsageError);
}

TEST(ImportanceSampling, OnPolicyWeightIsOneAndClipHolds) {
  Fixture f;
  const auto ds = collect_fresh_rollouts(f.env, f.st.posterior, f.st.shapes, 2, f.cfg, SeedTree(8));
  ASSERT_EQ(ds.count(), f.cfg.rollout_trajectories);
  const auto& params = f.actor.params();
  double mean_is = 0.0;
  for (const auto& tr : ds.trajectories) {
    EXPECT_NEAR(log_importance_ratio(tr, params, 2), 0.0, 1e-9);
    const double g = mdp::discounted_return(tr, 0.99);
    mean_is += importance_sampled_return(tr, params, 2, 0.99, 10.0);
    EXPECT_NEAR(importance_sampled_return(tr, params, 2, 0.99, 10.0), g, 1e-8 * std::max(1.0, g));
  }
  std::vector<const mdp::Trajectory*> all;
  for (const auto& tr : ds.trajectories) all.push_back(&tr);
  EXPECT_NEAR(ISDataset(all, 0.99, 10.0).mean_return(params), mean_is / double(ds.count()), 1e-10);

  auto far = params;
  for (auto& t : far)
    for (auto& v : t.data()) v += 0.7;
  for (const auto& tr : ds.trajectories) {
    const double g = mdp::discounted_return(tr, 0.99);
    const double w = importance_sampled_return(tr, far, 2, 0.99, 3.0) / g;
    EXPECT_GE(w, 1.0 / 3.0 - 1e-12);
    EXPECT_LE(w, 3.0 + 1e-12);
    EXPECT_NEAR(importance_sampled_return(tr, far, 2, 0.99, 1.0), g, 1e-12 * std::max(1.0, g));
  }
  EXPECT_THROW(importance_sampled_return(ds.trajectories[0], params, 2, 0.99, 0.5), UsageError);
}

TEST(PacBayesUpdate, ZeroEpochsOnlyCertifies) {
  Fixture f;
  f.cfg.pb_epochs = 0;
  const auto before = f.st.posterior;
  const auto rep = pac_bayes_update(f.st, f.actor, f.env, f.cfg, SeedTree(9));
  ASSERT_FALSE(rep.aborted);
  EXPECT_EQ(rep.objective_trace.size(), 1u);
  EXPECT_EQ(f.st.posterior.mean(), before.mean());
  EXPECT_EQ(f.st.posterior.log_std(), before.log_std());
  ASSERT_TRUE(rep.certificate.has_value());
  EXPECT_EQ(f.st.phase, Phase::critic_adaptation);
  EXPECT_EQ(f.st.pb_cycles, 1u);
  EXPECT_THROW(pac_bayes_update(f.st, f.actor, f.env, f.cfg, SeedTree(9)), UsageError);
}

TEST(PacBayesUpdate, ObjectiveNeverIncreasesAndBoundIsBelowReturn) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Fixture f;
    f.cfg.pb_epochs = 6;
    f.st.prior = posterior::DiagGaussian(f.st.prior.mean(), 0.05);
    const auto rep = pac_bayes_update(f.st, f.actor, f.env, f.cfg, SeedTree(seed));
    ASSERT_FALSE(rep.aborted);
    ASSERT_EQ(rep.objective_trace.size(), 7u);
    for (std::size_t k = 1; k < rep.objective_trace.size(); ++k)
      EXPECT_LE(rep.objective_trace[k], rep.objective_trace[k - 1] + 1e-12);
    const auto& c = *rep.certificate;
    EXPECT_LE(c.certified_lower_bound, c.empirical_return);
    EXPECT_DOUBLE_EQ(rep.kappa, f.st.kappa);
    EXPECT_EQ(posterior::flatten(f.actor.params()), f.st.posterior.mean());
    const auto again = cert::value_lower_bound(c.empirical_return, c.inputs);
    EXPECT_DOUBLE_EQ(again.certified_lower_bound, c.certified_lower_bound);
    EXPECT_EQ(c.inputs.n_trajectories, f.cfg.rollout_trajectories / 2);
  }
}

TEST(CriticAdaptation, AveragedTargetsAreTheMeanOfDraws) {
  Fixture f;
  f.st.posterior = posterior::DiagGaussian(f.st.posterior.mean(), 0.1);
  Rng rng(10);
  const auto b = random_batch(12, f.env.state_dim(), 2, rng);
  ad::Tensor noise(12, 2);
  rng.fill_normal(noise.span());
  std::vector<ad::Tensor> each;
  Rng r1(11);
  const auto avg = averaged_soft_targets(f.critics, f.st, 2, b, noise, 0.2, 0.99, 5, r1, &each);
  ASSERT_EQ(each.size(), 5u);
  for (std::size_t r = 0; r < 12; ++r) {
    double m = 0.0;
    for (const auto& y : each) m += y[r];
    EXPECT_NEAR(avg[r], m / 5.0, 1e-12);
  }
  Rng r2(11);
  const auto one = averaged_soft_targets(f.critics, f.st, 2, b, noise, 0.2, 0.99, 1, r2);
  Rng r3(11);
  const auto direct =
      sac::soft_targets(f.critics, posterior::unflatten(f.st.posterior.sample(r3), f.st.shapes), 2, b, noise, 0.2, 0.99);
  EXPECT_EQ(one.data(), direct.data());
  Rng r4(11);
  EXPECT_THROW(averaged_soft_targets(f.critics, f.st, 2, b, noise, 0.2, 0.99, 0, r4), UsageError);
}

TEST(CriticAdaptation, RunsForTheConfiguredStepsAndLeavesTheActor) {
  Fixture f;
  Rng rng(12);
  const auto b = random_batch(16, f.env.state_dim(), 2, rng);
  EXPECT_THROW(critic_adaptation_step(f.st, f.critics, 2, b, 0.2, f.cfg, rng), UsageError);
  f.st.phase = Phase::critic_adaptation;
  const auto actor_before = posterior::flatten(f.actor.params());
  const auto q_before = posterior::flatten(f.critics.q(0).params());
  for (std::size_t k = 0; k < f.cfg.adaptation_steps; ++k) {
    EXPECT_EQ(f.st.phase, Phase::critic_adaptation);
    critic_adaptation_step(f.st, f.critics, 2, b, 0.2, f.cfg, rng);
  }
  EXPECT_EQ(f.st.phase, Phase::normal);
  EXPECT_EQ(posterior::flatten(f.actor.params()), actor_before);
  EXPECT_NE(posterior::flatten(f.critics.q(0).params()), q_before);
}

TEST(Training, SameSeedSameOutputs) {
  const mdp::PointMass2D env;
  std::ostringstream m1, c1, m2, c2;
  const auto a = train_pbsac(env, tiny_config(), 4, outputs(m1, c1));
  const auto b = train_pbsac(env, tiny_config(), 4, outputs(m2, c2));
  EXPECT_EQ(m1.str(), m2.str());
  EXPECT_EQ(c1.str(), c2.str());
  EXPECT_EQ(a.final_return, b.final_return);
}

TEST(Training, RowsCertificatesAndTauSeries) {
  const mdp::PointMass2D env;
  const auto cfg = tiny_config();
  std::ostringstream metrics, certs;
  const auto res = train_pbsac(env, cfg, 6, outputs(metrics, certs));
  EXPECT_EQ(res.rows.size(), cfg.sac.total_steps / cfg.sac.eval_interval);
  EXPECT_EQ(res.certificates.size() + res.incidents.size(), 1 + cfg.sac.total_steps / cfg.pb_update_freq);
  EXPECT_EQ(res.tau_series.size(), res.certificates.size());
  for (std::size_t k = 1; k < res.tau_series.size(); ++k) EXPECT_GE(res.tau_series[k], res.tau_series[k - 1]);
  for (const auto& rec : res.certificates) {
    const auto& c = rec.certificate;
    EXPECT_LE(c.certified_lower_bound, c.empirical_return);
    EXPECT_LE(oracle::rel_err(c.deviation_bound,
                              oracle::deviation_bound_brute(c.inputs.r_max, c.inputs.gamma, c.inputs.horizon.steps(),
                                                            c.inputs.n_trajectories, c.inputs.tau_min, c.inputs.kl,
                                                            c.inputs.delta)),
              1e-12);
  }
  EXPECT_EQ(res.certificates.front().step, 0u);
  std::istringstream lines(metrics.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) ++n;
  EXPECT_EQ(n, 1 + res.rows.size());

  auto none = cfg;
  none.sac.total_steps = 0;
  EXPECT_TRUE(train_pbsac(env, none, 6).rows.empty());
}
