#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "common/oracles.hpp"

using namespace pbrl;
using namespace pbrl::mdp;

namespace {

Trajectory scalar_trajectory(const std::vector<double>& rewards) {
  Trajectory tr(1, 1, rewards.size());
  const std::vector<double> s{0.0}, a{0.0};
  for (double r : rewards) tr.push(s, a, r, s, false);
  return tr;
}

double naive_return(const std::vector<double>& r, double gamma) {
  double g = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) g += std::pow(gamma, double(k)) * r[k];
  return g;
}

}  // namespace

TEST(Returns, WorkedExamples) {
  EXPECT_DOUBLE_EQ(discounted_return(std::vector<double>{1, 1, 1}, 0.5), 1.75);
  EXPECT_DOUBLE_EQ(discounted_return(std::vector<double>{0.3, 5, 7}, 0.0), 0.3);
  EXPECT_THROW(discounted_return(std::vector<double>{}, 0.5), UsageError);
}

TEST(Returns, MatchesNaiveSumAndIsMonotone) {
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> r(1 + rng.index(50));
    for (auto& v : r) v = rng.uniform(0.0, 1.0);
    const double g = rng.uniform(0.0, 1.0);
    EXPECT_NEAR(discounted_return(r, g), naive_return(r, g), 1e-12);
    auto bigger = r;
    bigger[rng.index(r.size())] += 0.5;
    EXPECT_GE(discounted_return(bigger, g), discounted_return(r, g));
  }
}

TEST(Returns, EmpiricalLossIsNegativeMeanReturn) {
  TrajectoryDataset ds;
  ds.trajectories.push_back(scalar_trajectory({1, 1}));
  ds.trajectories.push_back(scalar_trajectory({1, 1}));
  EXPECT_DOUBLE_EQ(empirical_loss(ds, 1.0), -2.0);
  TrajectoryDataset one;
  one.trajectories.push_back(scalar_trajectory({2}));
  EXPECT_DOUBLE_EQ(empirical_loss(one, 0.9), -2.0);
}

TEST(Trajectory, RejectsBrokenContinuityAndOverflow) {
  Trajectory tr(1, 1, 2);
  tr.push(std::vector<double>{0}, std::vector<double>{0}, 0.5, std::vector<double>{1}, false);
  EXPECT_THROW(tr.push(std::vector<double>{2}, std::vector<double>{0}, 0.5, std::vector<double>{1}, false),
               ValidationError);
  tr.push(std::vector<double>{1}, std::vector<double>{0}, 0.5, std::vector<double>{1}, false);
  EXPECT_THROW(tr.push(std::vector<double>{1}, std::vector<double>{0}, 0.5, std::vector<double>{1}, false), UsageError);
}

TEST(Rollout, SameSeedSameTrajectory) {
  auto mdp = make_chain_mdp();
  auto pol = TabularPolicy(Eigen::MatrixXd::Constant(5, 2, 0.5));
  Rng a(5), b(5);
  EXPECT_EQ(rollout(mdp, pol, 30, a), rollout(mdp, pol, 30, b));
  Rng c(5);
  auto one = rollout(mdp, pol, 1, c);
  EXPECT_EQ(one.size(), 1u);
  Rng d(5);
  EXPECT_THROW(rollout(mdp, pol, 0, d), UsageError);
}

TEST(Rollout, RewardsStayInRange) {
  auto mdp = make_chain_mdp();
  auto pol = TabularPolicy(Eigen::MatrixXd::Constant(5, 2, 0.5));
  Rng rng(8);
  auto ds = collect(mdp, pol, 20, 40, rng);
  EXPECT_NO_THROW(ds.validate(mdp.r_max()));
  PointMass2D pm;
  Rng r2(9);
  std::vector<double> s = pm.reset(r2);
  for (int t = 0; t < 500; ++t) {
    auto res = pm.step(std::vector<double>{r2.uniform(-3, 3), r2.uniform(-3, 3)}, r2);
    EXPECT_GT(res.reward, 0.0);
    EXPECT_LE(res.reward, pm.r_max());
  }
}

TEST(ExactValue, GeometricSeries) {
  // One state, one action, reward 1: value is (1 - g^H) / (1 - g).
  TabularMDP m({Eigen::MatrixXd::Ones(1, 1)}, Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1), 0.9, 1.0);
  TabularPolicy p(Eigen::MatrixXd::Ones(1, 1));
  for (std::size_t H : {1, 5, 40}) EXPECT_NEAR(exact_value(m, p, H), (1 - std::pow(0.9, double(H))) / 0.1, 1e-12);
}

TEST(ExactValue, MatchesEnumerationAtHorizonTwo) {
  auto m = make_chain_mdp(4, 0.8);
  Eigen::MatrixXd probs(4, 2);
  probs << 0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.9, 0.1;
  TabularPolicy p(probs);
  double v = 0.0;
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 2; ++a) {
      const double w = m.initial_distribution()[s] * probs(s, a);
      double next = 0.0;
      for (int s2 = 0; s2 < 4; ++s2)
        for (int a2 = 0; a2 < 2; ++a2) next += m.transition(a)(s, s2) * probs(s2, a2) * m.rewards()(s2, a2);
      v += w * (m.rewards()(s, a) + 0.8 * next);
    }
  EXPECT_NEAR(exact_value(m, p, 2), v, 1e-14);
}

TEST(ExactValue, CounterexampleHasZeroValueFromUniformStart) {
  auto m = CounterexampleMDP::as_tabular(Eigen::Vector4d::Constant(0.25));
  TabularPolicy p(Eigen::MatrixXd::Ones(4, 1));
  EXPECT_NEAR(exact_value(m, p, 10), 0.0, 1e-15);
}

TEST(ExactValue, AgreesWithMonteCarlo) {
  auto m = make_chain_mdp();
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(5, 2);
  logits.col(1).setConstant(0.8);
  auto p = TabularPolicy::softmax(logits);
  Rng rng(21);
  const std::size_t n = 100000, H = 12;
  double s = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double g = discounted_return(rollout(m, p, H, rng), m.gamma());
    s += g;
    s2 += g * g;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / (n - 1));
  EXPECT_LE(std::abs(mean - exact_value(m, p, H)), 3.0 * se);
}

TEST(TabularMdp, RejectsInvalidTables) {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(TabularMDP({bad}, Eigen::MatrixXd::Zero(2, 1), Eigen::VectorXd::Constant(2, 0.5), 0.9, 1.0),
               ValidationError);
  Eigen::MatrixXd r(2, 1);
  r << 0.5, 1.5;
  EXPECT_THROW(TabularMDP({Eigen::MatrixXd::Identity(2, 2)}, r, Eigen::VectorXd::Constant(2, 0.5), 0.9, 1.0),
               ValidationError);
}

TEST(DatasetIo, RoundTripIsExact) {
  auto m = make_chain_mdp();
  auto p = TabularPolicy(Eigen::MatrixXd::Constant(5, 2, 0.5));
  Rng rng(4);
  auto ds = collect(m, p, 6, 9, rng, "uniform");
  std::stringstream io;
  write_dataset(io, ds);
  auto back = read_dataset(io);
  ASSERT_EQ(back.count(), ds.count());
  EXPECT_EQ(back.behavior_policy_id, "uniform");
  for (std::size_t j = 0; j < ds.count(); ++j) EXPECT_EQ(back.trajectories[j], ds.trajectories[j]);
  EXPECT_EQ(empirical_loss(back, 0.9), empirical_loss(ds, 0.9));

  const auto path = (std::filesystem::temp_directory_path() / "pbrl_dataset_roundtrip.csv").string();
  save_dataset(path, ds);
  EXPECT_EQ(load_dataset(path).trajectories, ds.trajectories);
  std::filesystem::remove(path);
}

TEST(Counterexample, BellmanErrorsDisagreeFromEqualStarts) {
  auto rows = bellman_error_sequence();
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].start, 'A');
  EXPECT_EQ(rows[0].next, 'C');
  EXPECT_EQ(rows[0].delta_t, 0.0);
  EXPECT_EQ(rows[0].delta_next, 1.0);
  EXPECT_EQ(rows[1].start, 'B');
  EXPECT_EQ(rows[1].next, 'D');
  EXPECT_EQ(rows[1].delta_t, 0.0);
  EXPECT_EQ(rows[1].delta_next, -1.0);
}
