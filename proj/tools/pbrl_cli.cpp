#include <iostream>
#include <limits>

#include <CLI11.hpp>

#include "pbrl/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace pbrl;
  CLI::App app{"PAC-Bayesian certificates and PB-SAC training"};
  app.require_subcommand(1);

  cli::TrainArgs train;
  auto* tr = app.add_subcommand("train", "Run PB-SAC and write metrics, certificates and checkpoints");
  tr->add_option("--config", train.config_path, "key = value config file")->check(CLI::ExistingFile);
  tr->add_option("--preset", train.preset, "base settings: default or desk")->capture_default_str();
  tr->add_option("--env", train.env, "environment")->capture_default_str();
  tr->add_option("--steps", train.steps, "total environment steps (overrides the config)");
  tr->add_option("--seed", train.seed, "root seed")->capture_default_str();
  tr->add_option("--out", train.out_dir, std::string("output root (default $") + cli::kOutputDirEnv + " or runs)");
  tr->add_option("--set", train.overrides, "key=value override, repeatable");

  cli::CertifyArgs cert;
  std::string horizon = "1";
  auto* ce = app.add_subcommand("certify", "Print one certificate row");
  ce->add_option("--kl", cert.inputs.kl, "KL(posterior || prior)")->capture_default_str();
  ce->add_option("--delta", cert.inputs.delta, "failure probability")->capture_default_str();
  ce->add_option("--tau-min", cert.inputs.tau_min, "mixing parameter")->capture_default_str();
  ce->add_option("--T", cert.inputs.n_trajectories, "number of trajectories")->capture_default_str();
  ce->add_option("--H", horizon, "horizon, or inf")->capture_default_str();
  ce->add_option("--gamma", cert.inputs.gamma, "discount")->capture_default_str();
  ce->add_option("--r-max", cert.inputs.r_max, "reward bound")->capture_default_str();
  ce->add_option("--empirical-return", cert.empirical_return, "posterior-averaged empirical return")
      ->capture_default_str();
  ce->add_option("--dataset", cert.dataset, "trajectory CSV; sets T, H and the empirical return")
      ->check(CLI::ExistingFile);
  ce->add_option("--posterior", cert.posterior, "posterior checkpoint; with --prior sets the KL")
      ->check(CLI::ExistingFile);
  ce->add_option("--prior", cert.prior, "prior checkpoint")->check(CLI::ExistingFile);

  cli::ConcentrationArgs conc;
  auto* vc = app.add_subcommand("verify-concentration", "Monte Carlo tail and coverage check on a tabular chain");
  vc->add_option("--env", conc.env, "tabular environment, chain-<n>")->capture_default_str();
  vc->add_option("--repeats", conc.repeats, "independent dataset draws")->capture_default_str();
  vc->add_option("--delta", conc.delta, "failure probability")->capture_default_str();
  vc->add_option("--T", conc.n_trajectories, "trajectories per dataset")->capture_default_str();
  vc->add_option("--H", conc.horizon, "horizon")->capture_default_str();
  vc->add_option("--thresholds", conc.thresholds, "tail table rows")->capture_default_str();
  vc->add_option("--seed", conc.seed, "root seed")->capture_default_str();
  vc->add_option("--workers", conc.workers, "threads; results do not depend on this")->capture_default_str();

  cli::MixingArgs mix;
  auto* mx = app.add_subcommand("mixing", "Exact mixing times and tau_min of a chain");
  mx->add_option("--matrix", mix.matrix, "whitespace-separated transition matrix file")->check(CLI::ExistingFile);
  mx->add_option("--chain", mix.chain, "two-state:<p>,<q> | uniform:<n> | identity:<n> | chain-<n>");
  mx->add_option("--grid", mix.grid, "epsilon grid size")->capture_default_str();

  auto* cx = app.add_subcommand("counterexample", "Bellman errors on the four-state machine");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kUsage;
  }

  try {
    if (*tr) return cli::cmd_train(train, std::cout, std::cerr);
    if (*ce) {
      cert.inputs.horizon = cli::parse_horizon(horizon);
      return cli::cmd_certify(cert, std::cout, std::cerr);
    }
    if (*vc) return cli::cmd_verify_concentration(conc, std::cout, std::cerr);
    if (*mx) return cli::cmd_mixing(mix, std::cout, std::cerr);
    if (*cx) return cli::cmd_counterexample(std::cout, std::cerr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsage;
  }
  return cli::kUsage;
}
