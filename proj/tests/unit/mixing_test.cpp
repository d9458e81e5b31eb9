#include <gtest/gtest.h>

#include <sstream>

#include "common/oracles.hpp"

using namespace pbrl;
using namespace pbrl::mixing;

TEST(TotalVariation, Examples) {
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0}, r{0.0, 1.0}, s{0.2, 0.8};
  EXPECT_DOUBLE_EQ(tv_distance(p, p), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(q, r), 1.0);
  EXPECT_NEAR(tv_distance(p, s), 0.3, 1e-15);
  EXPECT_THROW(tv_distance(p, std::vector<double>{1.0}), UsageError);
}

TEST(MixingTime, TwoStateAnalytic) {
  EXPECT_EQ(mixing_time_exact(MarkovChain::two_state(0.3, 0.2), 0.1), 4u);
  for (double p : {0.05, 0.2, 0.45, 0.85})
    for (double q : {0.1, 0.35, 0.6})
      for (double eps : {0.5, 0.1, 0.01})
        EXPECT_EQ(mixing_time_exact(MarkovChain::two_state(p, q), eps), oracle::two_state_mixing_time(p, q, eps))
            << p << " " << q << " " << eps;
}

TEST(MixingTime, IdenticalRowsMixInOneStep) {
  const Eigen::MatrixXd m = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
  EXPECT_EQ(mixing_time_exact(MarkovChain(m), 0.0), 1u);
  const auto est = tau_min_exact(MarkovChain(m));
  EXPECT_DOUBLE_EQ(est.tau_min, 4.0);
  EXPECT_EQ(est.epsilon_star, 0.0);
}

TEST(MixingTime, IdentityChainDoesNotMix) {
  EXPECT_THROW(mixing_time_exact(MarkovChain(Eigen::MatrixXd::Identity(3, 3)), 0.1), MixingError);
  EXPECT_THROW(tau_min_exact(MarkovChain(Eigen::MatrixXd::Identity(3, 3))), MixingError);
}

TEST(MixingTime, NonStochasticRowsAreNamed) {
  Eigen::MatrixXd m(3, 3);
  m << 0.5, 0.5, 0, 0.2, 0.2, 0.2, 0, 0, 1;
  try {
    MarkovChain c(m);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("offending rows: 1"), std::string::npos);
  }
}

TEST(MixingTime, NonincreasingInEpsilonAndPermutationInvariant) {
  Rng rng(17);
  for (int k = 0; k < 20; ++k) {
    Eigen::MatrixXd m(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) m(i, j) = rng.uniform(0.01, 1.0);
      m.row(i) /= m.row(i).sum();
    }
    MarkovChain c(m);
    const auto pc = c.permuted({2, 0, 3, 1});
    std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
    for (double eps : {0.001, 0.01, 0.05, 0.1, 0.3, 0.6, 0.9}) {
      const auto t = mixing_time_exact(c, eps);
      EXPECT_LE(t, prev);
      EXPECT_EQ(t, mixing_time_exact(pc, eps));
      prev = t;
    }
  }
}

TEST(MixingTime, TauMinMatchesDenseGridScan) {
  std::vector<double> grid;
  for (int i = 1; i < 10000; ++i) grid.push_back(double(i) / 10000.0);
  double best = std::numeric_limits<double>::infinity();
  for (double eps : grid) best = std::min(best, double(oracle::two_state_mixing_time(0.25, 0.25, eps)) * mixing_factor(eps));
  const auto est = tau_min_exact(MarkovChain::two_state(0.25, 0.25), grid);
  EXPECT_NEAR(est.tau_min, best, 1e-12 * best);
}

TEST(MixingTime, FactorExamples) {
  EXPECT_DOUBLE_EQ(mixing_factor(0.0), 4.0);
  EXPECT_DOUBLE_EQ(mixing_factor(0.5), 9.0);
}

TEST(Autocorrelation, WhiteNoiseGivesFour) {
  Rng rng(2);
  std::vector<double> x(20000);
  for (auto& v : x) v = rng.normal();
  const auto est = autocorrelation_tau(x);
  EXPECT_EQ(est.lag, 1u);
  EXPECT_DOUBLE_EQ(est.tau_min, 4.0);
  EXPECT_FALSE(est.degenerate);
}

TEST(Autocorrelation, ConstantSeriesIsFlagged) {
  std::vector<double> x(100, 0.7);
  const auto est = autocorrelation_tau(x);
  EXPECT_DOUBLE_EQ(est.tau_min, 4.0);
  EXPECT_TRUE(est.degenerate);
}

TEST(Autocorrelation, UpperBoundsExactOnTwoStateChains) {
  // Sticky two-state chains: the estimate from a long indicator series
  // should not fall below the exact value.
  std::size_t ok = 0, runs = 0;
  for (int k = 0; k < 200; ++k) {
    Rng rng(100 + k);
    const double p = rng.uniform(0.05, 0.3), q = rng.uniform(0.05, 0.3);
    const auto exact = tau_min_exact(MarkovChain::two_state(p, q)).tau_min;
    std::vector<double> x(100000);
    int s = 0;
    for (auto& v : x) {
      v = s;
      s = s == 0 ? (rng.uniform() < p ? 1 : 0) : (rng.uniform() < q ? 0 : 1);
    }
    ++runs;
    ok += autocorrelation_tau(x).tau_min >= exact;
  }
  EXPECT_GE(double(ok) / double(runs), 0.95);
}

TEST(Autocorrelation, SegmentsArePooledWithoutCrossProducts) {
  std::vector<double> a(50), b(50);
  for (int i = 0; i < 50; ++i) {
    a[i] = i % 2;
    b[i] = (i + 1) % 2;
  }
  PooledAutocorrelation acf({a, b});
  EXPECT_NEAR(acf.at(1), -1.0, 1e-12);
}

TEST(ConservativeTau, TakesTheLarger) {
  MixingEstimate a, b;
  a.tau_min = 4;
  b.tau_min = 10;
  EXPECT_DOUBLE_EQ(conservative_tau(a, b).tau_min, 10.0);
  EXPECT_DOUBLE_EQ(conservative_tau(b, a).tau_min, 10.0);
  EXPECT_EQ(conservative_tau(b, a).method, MixingMethod::conservative);
}

TEST(ParseChain, ReadsCommentsAndRejectsText) {
  std::istringstream ok("# two states\n0.9 0.1\n0.2 0.8\n");
  EXPECT_EQ(parse_chain(ok).size(), 2u);
  std::istringstream bad("0.9 x\n0.2 0.8\n");
  EXPECT_THROW(parse_chain(bad), ValidationError);
}
