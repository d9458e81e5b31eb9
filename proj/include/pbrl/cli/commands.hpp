#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pbrl/certificate/bound.hpp"
#include "pbrl/certificate/chain_experiment.hpp"
#include "pbrl/certificate/concentration.hpp"
#include "pbrl/core/csv.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/counterexample.hpp"
#include "pbrl/mdp/dataset_io.hpp"
#include "pbrl/mdp/point_mass.hpp"
#include "pbrl/mdp/returns.hpp"
#include "pbrl/mixing/markov_chain.hpp"
#include "pbrl/mixing/mixing_time.hpp"
#include "pbrl/pbsac/config.hpp"
#include "pbrl/pbsac/pbsac.hpp"
#include "pbrl/posterior/diag_gaussian.hpp"

#ifndef PBRL_CODE_VERSION
#define PBRL_CODE_VERSION "unversioned"
#endif

namespace pbrl::cli {

/// Exit codes shared by every subcommand.
enum Exit : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Overrides the default output root for `train`; an explicit --out wins.
inline constexpr const char* kOutputDirEnv = "PBRL_OUTPUT_DIR";

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline cert::Horizon parse_horizon(const std::string& s) {
  if (s == "inf") return cert::Horizon::infinite();
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw UsageError("H must be a positive integer or 'inf', got '" + s + "'");
  return cert::Horizon::finite(std::stoul(s));
}

// ---------------------------------------------------------------- train

struct RunManifest {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string config;  // dump_config text
  std::string code_version = PBRL_CODE_VERSION;
  std::string env;
  std::string output_dir;
  std::string start_time;
  std::string end_time;  // empty while running
  std::string status = "running";

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw UsageError("cannot write manifest '" + path.string() + "'");
    os << "run_id = " << run_id << "\nseed = " << seed << "\ncode_version = " << code_version << "\nenv = " << env
       << "\noutput_dir = " << output_dir << "\nstart_time = " << start_time << "\nend_time = " << end_time
       << "\nstatus = " << status << "\n[config]\n"
       << config;
  }
};

/// Deterministic in (env, seed, config) so reruns land in the same directory.
inline std::string make_run_id(const std::string& env, std::uint64_t seed, const std::string& config) {
  std::ostringstream os;
  os << "pbsac-" << env << "-s" << seed << "-" << std::hex << std::setw(8) << std::setfill('0')
     << (pbrl::detail::fnv1a(config) & 0xffffffffu);
  return os.str();
}

struct TrainArgs {
  std::string config_path;
  std::string preset = "default";  // or "desk"
  std::string env = "point_mass";
  std::optional<std::size_t> steps;
  std::uint64_t seed = 1;
  std::string out_dir;                 // empty: $PBRL_OUTPUT_DIR, then "runs"
  std::vector<std::string> overrides;  // key=value, applied after the config file
};

inline pbsac::PBSACConfig resolve_train_config(const TrainArgs& a) {
  pbsac::PBSACConfig cfg;
  if (a.preset == "desk")
    cfg = pbsac::desk_config();
  else if (a.preset != "default")
    throw UsageError("unknown preset '" + a.preset + "' (expected default or desk)");
  if (!a.config_path.empty()) cfg = pbsac::load_config(a.config_path, cfg);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    pbsac::set_field(cfg, pbsac::detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  if (a.steps) cfg.sac.total_steps = *a.steps;
  cfg.validate();
  return cfg;
}

/// Writes <out>/<run_id>/{manifest.txt, metrics.csv, certificates.csv,
/// train.log, checkpoint/}. The manifest is written before training starts
/// and rewritten with the end time and status afterwards.
inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  pbsac::PBSACConfig cfg;
  try {
    if (a.env != "point_mass") throw UsageError("unknown environment '" + a.env + "' (expected point_mass)");
    cfg = resolve_train_config(a);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  std::string root = a.out_dir;
  if (root.empty()) {
    const char* env_dir = std::getenv(kOutputDirEnv);
    root = env_dir && *env_dir ? env_dir : "runs";
  }
  RunManifest m;
  m.seed = a.seed;
  m.config = pbsac::dump_config(cfg);
  m.env = a.env;
  m.run_id = make_run_id(a.env, a.seed, m.config);
  const std::filesystem::path dir = std::filesystem::path(root) / m.run_id;
  m.output_dir = dir.string();
  m.start_time = utc_timestamp();
  std::filesystem::create_directories(dir);
  m.write(dir / "manifest.txt");

  std::ofstream metrics(dir / "metrics.csv"), certs(dir / "certificates.csv"), log(dir / "train.log");
  pbsac::TrainOutputs outs{&metrics, &certs, &log, (dir / "checkpoint").string()};
  int code = kOk;
  try {
    auto res = pbsac::train_pbsac(mdp::PointMass2D{}, cfg, a.seed, outs);
    m.status = "completed";
    out << "run " << m.run_id << " -> " << dir.string() << '\n';
    if (!res.certificates.empty()) {
      const auto& c = res.certificates.back().certificate;
      out << "final return " << format_double(res.final_return) << ", certified lower bound "
          << format_double(c.certified_lower_bound) << " at step " << res.certificates.back().step << '\n';
    }
    for (const auto& i : res.incidents) err << "incident: " << i << '\n';
  } catch (const std::exception& e) {
    m.status = std::string("failed: ") + e.what();
    err << "error: " << e.what() << '\n';
    code = kFailure;
  }
  m.end_time = utc_timestamp();
  m.write(dir / "manifest.txt");
  return code;
}

// -------------------------------------------------------------- certify

struct CertifyArgs {
  cert::CertificateInputs inputs;
  double empirical_return = 0.0;
  std::string dataset;    // when set, T, H and the empirical return come from the file
  std::string posterior;  // optional pair of Gaussian checkpoints; KL(posterior || prior) replaces --kl
  std::string prior;
};

inline std::vector<std::string> certify_header() {
  return {"kl", "delta", "tau_min", "T", "H", "gamma", "r_max", "kappa_star", "deviation_bound", "empirical_return",
          "certified_lower_bound"};
}

inline std::vector<std::string> certify_cells(const cert::Certificate& c) {
  const auto& in = c.inputs;
  return {format_double(in.kl),           format_double(in.delta),        format_double(in.tau_min),
          std::to_string(in.n_trajectories), in.horizon.to_string(),      format_double(in.gamma),
          format_double(in.r_max),        format_double(c.kappa_star),    format_double(c.deviation_bound),
          format_double(c.empirical_return), format_double(c.certified_lower_bound)};
}

inline cert::Certificate certify(const CertifyArgs& a) {
  cert::CertificateInputs in = a.inputs;
  double emp = a.empirical_return;
  if (!a.dataset.empty()) {
    const auto ds = mdp::load_dataset(a.dataset);
    if (ds.empty()) throw UsageError("dataset '" + a.dataset + "' has no trajectories");
    ds.validate(in.r_max);
    in.n_trajectories = ds.count();
    in.horizon = cert::Horizon::finite(ds.horizon());
    emp = -mdp::empirical_loss(ds, in.gamma);
  }
  if (a.posterior.empty() != a.prior.empty()) throw UsageError("--posterior and --prior go together");
  if (!a.posterior.empty())
    in.kl = posterior::kl_diag_gaussians(posterior::load_gaussian(a.posterior).dist,
                                         posterior::load_gaussian(a.prior).dist);
  return cert::value_lower_bound(emp, in);
}

inline int cmd_certify(const CertifyArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const auto c = certify(a);
    CsvWriter w(out, certify_header());
    w.row(certify_cells(c));
    return kOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

// ------------------------------------------------ verify-concentration

struct ConcentrationArgs {
  std::string env = "chain-5";
  std::size_t repeats = 2000;
  double delta = 0.1;
  std::size_t n_trajectories = 8;
  std::size_t horizon = 16;
  std::size_t thresholds = 20;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

struct ConcentrationOutcome {
  cert::ChainExperiment experiment;
  cert::ConcentrationReport tails;
  cert::ValidityReport validity;
  bool ok() const { return !tails.any_flagged() && tails.mean_consistent && validity.ok; }
};

inline ConcentrationOutcome verify_concentration(const ConcentrationArgs& a) {
  if (a.repeats == 0) throw UsageError("repeats must be positive");
  if (!(a.delta > 0.0 && a.delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
  if (a.thresholds == 0) throw UsageError("need at least one threshold");
  ConcentrationOutcome o{cert::make_chain_experiment(cert::parse_chain_name(a.env), 8, a.n_trajectories, a.horizon,
                                                     a.delta),
                         {},
                         {}};
  const auto in = o.experiment.inputs();
  const auto grid = cert::default_thresholds(cert::c_norm_sq(in.r_max, in.gamma, in.horizon, in.n_trajectories),
                                             in.tau_min, a.repeats, a.thresholds);
  const SeedTree seeds(a.seed);
  o.tails = cert::concentration_check(o.experiment.mdp, o.experiment.support.front(), in, a.repeats, grid,
                                      seeds.seed("tails"), a.workers);
  o.validity = cert::bound_validity_check(o.experiment.mdp, o.experiment.support, o.experiment.weights, in, a.repeats,
                                          seeds.seed("validity"), a.workers);
  return o;
}

/// Tail table as CSV, then a validity summary. Nonzero exit if any tail
/// row exceeds its bound, the deviations are biased, or the violation rate
/// is above delta plus three standard errors.
inline int cmd_verify_concentration(const ConcentrationArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<ConcentrationOutcome> res;
  try {
    res = verify_concentration(a);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  const auto& o = *res;
  {
    CsvWriter w(out, {"threshold", "observed", "bound", "allowance", "flagged"});
    for (const auto& r : o.tails.rows)
      w.row({format_double(r.threshold), format_double(r.observed), format_double(r.bound), format_double(r.allowance),
             r.flagged ? "1" : "0"});
  }
  const auto& v = o.validity;
  out << "\nrepeats,T,H,delta,kl,tau_min,bound,violations,violation_rate,allowed_rate,mean_deviation,"
         "deviation_std_error\n"
      << v.repeats << ',' << a.n_trajectories << ',' << a.horizon << ',' << format_double(a.delta) << ','
      << format_double(o.experiment.kl) << ',' << format_double(o.experiment.tau_min) << ',' << format_double(v.bound)
      << ',' << v.violations << ',' << format_double(v.violation_rate) << ',' << format_double(v.allowed_rate) << ','
      << format_double(o.tails.mean_deviation) << ',' << format_double(o.tails.deviation_std_error) << '\n';
  if (o.ok()) return kOk;
  if (o.tails.any_flagged()) err << "flag: observed tail frequency above the concentration bound\n";
  if (!o.tails.mean_consistent) err << "flag: mean deviation is more than 3 standard errors from zero\n";
  if (!v.ok) err << "flag: violation rate above the allowed rate\n";
  return kFailure;
}

// --------------------------------------------------------------- mixing

struct MixingArgs {
  std::string matrix;  // path to a whitespace-separated matrix file
  std::string chain;   // built-in: two-state:<p>,<q> | uniform:<n> | identity:<n> | chain-<n>
  std::size_t grid = 512;
};

inline mixing::MarkovChain builtin_chain(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon), arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto count = [&] {
    if (arg.empty() || arg.find_first_not_of("0123456789") != std::string::npos || std::stoul(arg) == 0)
      throw UsageError("chain '" + spec + "' needs a positive size");
    return Eigen::Index(std::stoul(arg));
  };
  if (kind == "two-state") {
    const auto comma = arg.find(',');
    if (comma == std::string::npos) throw UsageError("two-state chain needs p,q");
    return mixing::MarkovChain::two_state(pbsac::detail::parse_real("p", arg.substr(0, comma)),
                                          pbsac::detail::parse_real("q", arg.substr(comma + 1)));
  }
  if (kind == "uniform") {
    const auto n = count();
    return mixing::MarkovChain(Eigen::MatrixXd::Constant(n, n, 1.0 / double(n)));
  }
  if (kind == "identity") return mixing::MarkovChain(Eigen::MatrixXd::Identity(count(), count()));
  if (kind.rfind("chain-", 0) == 0) {
    // Drift chain under the uniform random policy.
    const auto m = mdp::make_chain_mdp(cert::parse_chain_name(kind));
    const auto pol = mdp::TabularPolicy(Eigen::MatrixXd::Constant(Eigen::Index(m.n_states()), 2, 0.5));
    return mixing::MarkovChain(mdp::induced_chain(m, pol));
  }
  throw UsageError("unknown built-in chain '" + spec + "'");
}

/// One CSV row per grid point (tau is "inf" where the chain never gets
/// that close), then the minimiser on a final line.
inline int cmd_mixing(const MixingArgs& a, std::ostream& out, std::ostream& err) {
  try {
    if (a.matrix.empty() == a.chain.empty()) throw UsageError("give exactly one of --matrix or --chain");
    const auto chain = a.matrix.empty() ? builtin_chain(a.chain) : mixing::load_chain(a.matrix);
    const auto grid = mixing::default_epsilon_grid(a.grid);
    const auto best = mixing::tau_min_exact(chain, grid);
    mixing::MixingProfile profile(chain);
    CsvWriter w(out, {"epsilon", "tau", "factor", "tau_times_factor"});
    for (double eps : grid) {
      std::string tau = "inf", prod = "inf";
      try {
        const auto t = profile.mixing_time(eps);
        tau = std::to_string(t);
        prod = format_double(double(t) * mixing::mixing_factor(eps));
      } catch (const MixingError&) {
      }
      w.row({format_double(eps), tau, format_double(mixing::mixing_factor(eps)), prod});
    }
    out << "tau_min=" << format_double(best.tau_min) << " epsilon_star=" << format_double(best.epsilon_star)
        << " tau_at_epsilon_star=" << best.tau_at_epsilon_star << '\n';
    return kOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const MixingError& e) {
    err << "error: chain does not mix: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

// ------------------------------------------------------- counterexample

inline std::string signed_cell(double v) { return v > 0.0 ? "+" + format_double(v) : format_double(v); }

inline int cmd_counterexample(std::ostream& out, std::ostream&) {
  CsvWriter w(out, {"start", "next", "delta_t", "delta_t_plus_1"});
  const auto rows = mdp::bellman_error_sequence();
  for (const auto& r : rows)
    w.row({std::string(1, r.start), std::string(1, r.next), signed_cell(r.delta_t), signed_cell(r.delta_next)});
  out << "Starts A and B both have delta_t = 0, yet delta_t+1 is +1 from A and -1 from B: the Bellman-error "
         "sequence is not a Markov chain.\n";
  return kOk;
}

}  // namespace pbrl::cli
