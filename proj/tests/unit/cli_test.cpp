#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "common/oracles.hpp"

using namespace pbrl;
using namespace pbrl::cli;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

std::vector<std::string> cells_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string c; std::getline(is, c, ',');) out.push_back(c);
  return out;
}

CertifyArgs example_args() {
  CertifyArgs a;
  a.inputs.r_max = 1.0;
  a.inputs.gamma = 0.0;
  a.inputs.horizon = cert::Horizon::finite(1);
  a.inputs.n_trajectories = 2;
  a.inputs.tau_min = 4.0;
  a.inputs.delta = 2.0 / std::exp(1.0);
  a.empirical_return = 3.0;
  return a;
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("pbrl_cli_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Certify, PrintsHeaderAndOneRow) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_certify(example_args(), out, err), kOk);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0],
            "kl,delta,tau_min,T,H,gamma,r_max,kappa_star,deviation_bound,empirical_return,certified_lower_bound");
  const auto cells = cells_of(lines[1]);
  ASSERT_EQ(cells.size(), 11u);
  EXPECT_EQ(cells[3], "2");
  EXPECT_EQ(cells[4], "1");
  EXPECT_NEAR(std::stod(cells[7]), 2.0, 1e-15);
  EXPECT_NEAR(std::stod(cells[8]), 1.0, 1e-15);
  EXPECT_NEAR(std::stod(cells[10]), 2.0, 1e-15);
}

TEST(Certify, DoublingTrajectoriesScalesTheBound) {
  auto a = example_args();
  a.inputs.gamma = 0.9;
  a.inputs.horizon = cert::Horizon::finite(50);
  a.inputs.kl = 3.0;
  const double b1 = certify(a).deviation_bound;
  a.inputs.n_trajectories *= 2;
  EXPECT_NEAR(certify(a).deviation_bound / b1, 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(Certify, ReadsTAndHFromADataset) {
  const auto dir = scratch("dataset");
  std::filesystem::create_directories(dir);
  const auto ds = oracle::constant_dataset(5, 7, 0.5);
  mdp::save_dataset((dir / "d.csv").string(), ds);
  auto a = example_args();
  a.inputs.gamma = 0.5;
  a.dataset = (dir / "d.csv").string();
  const auto c = certify(a);
  std::filesystem::remove_all(dir);
  EXPECT_EQ(c.inputs.n_trajectories, 5u);
  EXPECT_EQ(c.inputs.horizon, cert::Horizon::finite(7));
  EXPECT_NEAR(c.empirical_return, 0.5 * (1 - std::pow(0.5, 7)) / 0.5, 1e-14);
}

TEST(Certify, BadDeltaIsAUsageError) {
  auto a = example_args();
  a.inputs.delta = 1.0;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_certify(a, out, err), kUsage);
  EXPECT_NE(err.str().find("delta"), std::string::npos);
  a = example_args();
  a.posterior = "p.txt";
  EXPECT_EQ(cmd_certify(a, out, err), kUsage);
  EXPECT_THROW(parse_horizon("0"), UsageError);
  EXPECT_THROW(parse_horizon("12x"), UsageError);
  EXPECT_TRUE(parse_horizon("inf").is_infinite());
}

TEST(Counterexample, PrintsBothRowsAndTheStatement) {
  std::ostringstream out, err;
  ASSERT_EQ(cmd_counterexample(out, err), kOk);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "start,next,delta_t,delta_t_plus_1");
  EXPECT_EQ(lines[1], "A,C,0,+1");
  EXPECT_EQ(lines[2], "B,D,0,-1");
  EXPECT_NE(lines[3].find("not a Markov chain"), std::string::npos);
}

TEST(Mixing, TwoStateOutputEndsWithTheMinimiser) {
  std::ostringstream out, err;
  MixingArgs a;
  a.chain = "two-state:0.3,0.2";
  a.grid = 16;
  ASSERT_EQ(cmd_mixing(a, out, err), kOk);
  const auto lines = lines_of(out.str());
  ASSERT_EQ(lines.size(), 18u);
  EXPECT_EQ(lines[0], "epsilon,tau,factor,tau_times_factor");
  EXPECT_EQ(lines.back().rfind("tau_min=", 0), 0u);
  const auto best = mixing::tau_min_exact(mixing::MarkovChain::two_state(0.3, 0.2), mixing::default_epsilon_grid(16));
  EXPECT_NE(lines.back().find("tau_min=" + format_double(best.tau_min)), std::string::npos);
}

TEST(Mixing, RejectsBadInputs) {
  std::ostringstream out, err;
  MixingArgs none;
  EXPECT_EQ(cmd_mixing(none, out, err), kUsage);
  MixingArgs ident;
  ident.chain = "identity:3";
  EXPECT_EQ(cmd_mixing(ident, out, err), kFailure);
  EXPECT_NE(err.str().find("does not mix"), std::string::npos);
  MixingArgs bogus;
  bogus.chain = "ring:4";
  EXPECT_EQ(cmd_mixing(bogus, out, err), kUsage);
  EXPECT_EQ(builtin_chain("uniform:4").size(), 4u);
  EXPECT_EQ(builtin_chain("chain-6").size(), 6u);
}

TEST(VerifyConcentration, ZeroRepeatsIsAUsageError) {
  ConcentrationArgs a;
  a.repeats = 0;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_verify_concentration(a, out, err), kUsage);
  a.repeats = 10;
  a.env = "grid";
  EXPECT_EQ(cmd_verify_concentration(a, out, err), kUsage);
}

TEST(VerifyConcentration, SameSeedSameOutput) {
  ConcentrationArgs a;
  a.repeats = 200;
  a.thresholds = 5;
  std::ostringstream o1, o2, e1, e2;
  const int c1 = cmd_verify_concentration(a, o1, e1);
  const int c2 = cmd_verify_concentration(a, o2, e2);
  EXPECT_EQ(c1, c2);
  EXPECT_EQ(o1.str(), o2.str());
  EXPECT_EQ(lines_of(o1.str()).size(), 1 + 5 + 1 + 2u);
}

TEST(Train, ZeroStepsWritesARunDirectory) {
  const auto root = scratch("train0");
  TrainArgs a;
  a.preset = "desk";
  a.steps = 0;
  a.out_dir = root.string();
  std::ostringstream out, err;
  ASSERT_EQ(cmd_train(a, out, err), kOk) << err.str();
  const auto cfg = resolve_train_config(a);
  const auto dir = root / make_run_id("point_mass", a.seed, pbsac::dump_config(cfg));
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "certificates.csv"));
  std::ifstream m(dir / "manifest.txt");
  std::stringstream text;
  text << m.rdbuf();
  EXPECT_NE(text.str().find("status = completed"), std::string::npos);
  std::filesystem::remove_all(root);
}

TEST(Train, SameSeedGivesIdenticalFiles) {
  auto run = [](const std::filesystem::path& root) {
    TrainArgs a;
    a.out_dir = root.string();
    a.overrides = {"actor_hidden=8", "critic_hidden=8", "batch_size=16", "learning_starts=100", "total_steps=400",
                   "eval_interval=200", "eval_episodes=2", "max_episode_steps=20", "pb_update_freq=200",
                   "pb_reset_freq=200", "pb_epochs=2", "pb_samples=4", "cert_samples=2", "adaptation_samples=4",
                   "adaptation_steps=5", "rollout_trajectories=8", "rollout_steps=10"};
    std::ostringstream out, err;
    EXPECT_EQ(cmd_train(a, out, err), kOk) << err.str();
    const auto dir = root / make_run_id("point_mass", a.seed, pbsac::dump_config(resolve_train_config(a)));
    std::string text;
    for (const char* f : {"metrics.csv", "certificates.csv"}) {
      std::ifstream is(dir / f);
      std::stringstream ss;
      ss << is.rdbuf();
      text += ss.str();
    }
    return text;
  };
  const auto r1 = scratch("train_a"), r2 = scratch("train_b");
  const auto a = run(r1), b = run(r2);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  std::filesystem::remove_all(r1);
  std::filesystem::remove_all(r2);
}

TEST(Train, BadInputsAreUsageErrors) {
  std::ostringstream out, err;
  TrainArgs a;
  a.env = "cartpole";
  EXPECT_EQ(cmd_train(a, out, err), kUsage);
  TrainArgs b;
  b.preset = "huge";
  EXPECT_EQ(cmd_train(b, out, err), kUsage);
  TrainArgs c;
  c.overrides = {"nonsense=1"};
  EXPECT_EQ(cmd_train(c, out, err), kUsage);
  EXPECT_NE(err.str().find("nonsense"), std::string::npos);
}
