// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress
// on stderr. Exits nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>

#include "common/oracles.hpp"
#include "pbrl/cli/commands.hpp"

using namespace pbrl;
using oracle::Check;
using oracle::fmt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Check c_norm_grid() {
  double worst = 0.0;
  for (double g : {0.1, 0.5, 0.9, 0.99})
    for (std::size_t H : {1, 2, 10, 100})
      for (std::size_t T : {1, 3, 10}) {
        const double closed = cert::c_norm_sq(1.3, g, cert::Horizon::finite(H), T);
        worst = std::max(worst, oracle::rel_err(closed, oracle::c_norm_sq_brute(1.3, g, H, T)));
      }
  return {worst <= 1e-12, "48 cases, max rel err " + fmt(worst)};
}

Check bounded_differences(Rng& rng) {
  double worst = 0.0;
  bool all_hold = true;
  for (int k = 0; k < 100; ++k) {
    const double gamma = rng.uniform(0.0, 1.0), r_max = rng.uniform(0.5, 2.0);
    const std::size_t H = 1 + rng.index(40), T = 1 + rng.index(12);
    const std::size_t h = 1 + rng.index(H), j = rng.index(T);
    const auto ds = oracle::constant_dataset(T, H, r_max);
    const auto worst_case = oracle::replace_suffix(ds, j, h, 0.0);
    const auto rep = cert::bounded_difference_check(ds, worst_case, gamma, r_max);
    const double want = oracle::suffix_coefficient_sum(r_max, gamma, h, H, T);
    all_hold = all_hold && rep.holds && rep.trajectory == j && rep.first_step == h;
    worst = std::max({worst, std::abs(rep.observed - want), std::abs(rep.bound - want)});
  }
  return {all_hold && worst <= 1e-12, "100 cases, max |observed - suffix sum| " + fmt(worst)};
}

Check kappa_optimality(Rng& rng) {
  double worst_grid = 0.0, worst_identity = 0.0;
  std::vector<double> grid(10000);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = std::pow(10.0, -6.0 + 12.0 * double(i) / double(grid.size() - 1));
  for (int k = 0; k < 100; ++k) {
    cert::CertificateInputs in;
    in.r_max = rng.uniform(0.1, 5.0);
    in.gamma = rng.uniform(0.0, 0.999);
    in.horizon = cert::Horizon::finite(1 + rng.index(500));
    in.n_trajectories = 1 + rng.index(1000);
    in.tau_min = rng.uniform(1.0, 200.0);
    in.kl = std::exp(rng.uniform(std::log(1e-4), std::log(1e3)));
    in.delta = rng.uniform(0.001, 0.5);
    const double loss = rng.uniform(-50.0, 0.0);
    const double cn = cert::c_norm_sq(in.r_max, in.gamma, in.horizon, in.n_trajectories);
    const double ks = cert::kappa_star(in.kl, in.delta, cn, in.tau_min);
    auto obj = [&](double kappa) { return cert::kappa_objective(loss, in.kl, kappa, cn, in.tau_min, in.delta, true); };
    const double at_star = obj(ks);
    double best = std::numeric_limits<double>::infinity();
    for (double kappa : grid) best = std::min(best, obj(kappa));
    worst_grid = std::max(worst_grid, (at_star - best) / std::max(std::abs(best), 1e-300));
    worst_identity = std::max(worst_identity, oracle::rel_err(cert::pac_bayes_bound(in), at_star - loss));
  }
  return {worst_grid <= 1e-9 && worst_identity <= 1e-12,
          "max excess over grid minimum " + fmt(std::max(worst_grid, 0.0)) + " rel, bound identity err " +
              fmt(worst_identity)};
}

Check bound_validity(const cli::ConcentrationOutcome& o) {
  const auto& v = o.validity;
  const double allowed = 0.1 + 3.0 * std::sqrt(0.1 * 0.9 / 2000.0);
  const auto in = o.experiment.inputs();
  const double b = oracle::deviation_bound_brute(in.r_max, in.gamma, o.experiment.horizon, in.n_trajectories, in.tau_min,
                                                 in.kl, in.delta);
  const double berr = oracle::rel_err(b, v.bound);
  return {v.repeats == 2000 && v.violation_rate <= allowed && berr <= 1e-12,
          std::to_string(v.violations) + "/2000 violations (rate " + fmt(v.violation_rate) + ", allowed " +
              fmt(allowed) + "), bound " + fmt(v.bound) + ", KL " + fmt(in.kl) + ", tau_min " + fmt(in.tau_min)};
}

Check paulin_tails(const cli::ConcentrationOutcome& o) {
  const auto& r = o.tails;
  const auto in = o.experiment.inputs();
  const double cn = oracle::c_norm_sq_brute(in.r_max, in.gamma, o.experiment.horizon, in.n_trajectories);
  bool ok = r.rows.size() == 20;
  double tightest = std::numeric_limits<double>::infinity();
  for (const auto& row : r.rows) {
    const double b = oracle::tail_bound(row.threshold, cn, in.tau_min);
    const double p = std::min(b, 1.0);
    const double allowance = 3.0 * std::sqrt(p * (1.0 - p) / double(r.repeats));
    ok = ok && oracle::rel_err(b, row.bound) <= 1e-12 && row.observed <= b + allowance;
    tightest = std::min(tightest, b + allowance - row.observed);
  }
  return {ok, std::to_string(r.rows.size()) + " thresholds, smallest margin " + fmt(tightest)};
}

Check exact_mixing() {
  bool ok = true;
  std::size_t chains = 0;
  const double grid[] = {0.1, 0.3, 0.5, 0.7, 0.9};
  const auto eps_grid = mixing::default_epsilon_grid(64);
  for (double p : grid)
    for (double q : grid) {
      if (std::abs(p + q - 1.0) < 1e-12) continue;
      ++chains;
      const auto chain = mixing::MarkovChain::two_state(p, q);
      for (double eps : {0.5, 0.1, 0.01})
        ok = ok && mixing::mixing_time_exact(chain, eps) == oracle::two_state_mixing_time(p, q, eps);
      mixing::MixingProfile prof(chain);
      std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
      for (std::size_t i = 1; i < eps_grid.size(); ++i) {
        const auto t = prof.mixing_time(eps_grid[i]);
        ok = ok && t <= prev;
        prev = t;
      }
    }
  return {ok, std::to_string(chains) + " chains x 3 tolerances; tau nonincreasing on a 63-point grid"};
}

Check counterexample() {
  std::ostringstream out, err;
  const int code = cli::cmd_counterexample(out, err);
  std::istringstream is(out.str());
  std::string header, line;
  std::getline(is, header);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) break;
    rows.push_back(cells);
  }
  const bool ok = code == 0 && header == "start,next,delta_t,delta_t_plus_1" && rows.size() == 2 &&
                  rows[0] == std::vector<std::string>{"A", "C", "0", "+1"} &&
                  rows[1] == std::vector<std::string>{"B", "D", "0", "-1"} && std::stod(rows[0][3]) == 1.0 &&
                  std::stod(rows[1][3]) == -1.0;
  return {ok, "rows A,C,0,+1 and B,D,0,-1"};
}

Check reinforce_unbiased(Rng& rng) {
  const posterior::DiagGaussian rho({0.8, -1.2, 1.0}, std::vector<double>{0.5, 0.4, 0.6});
  const auto toy = oracle::reinforce_quadratic(rho, 100000, rng);
  double max_z = 0.0, max_rel_mean = 0.0, max_rel_sd = 0.0;
  for (std::size_t i = 0; i < toy.estimate.size(); ++i) {
    max_z = std::max(max_z, std::abs(toy.estimate[i] - toy.analytic[i]) / toy.std_error[i]);
    const double rel = oracle::rel_err(toy.estimate[i], toy.analytic[i]);
    (i < 3 ? max_rel_mean : max_rel_sd) = std::max(i < 3 ? max_rel_mean : max_rel_sd, rel);
  }
  double se_floor = 0.0;
  for (std::size_t i = 0; i < toy.estimate.size(); ++i)
    se_floor = std::max(se_floor, toy.std_error[i] / std::abs(toy.analytic[i]));
  return {max_z <= 3.0 && std::max(max_rel_mean, max_rel_sd) <= 0.01,
          "max |err|/SE " + fmt(max_z) + "; max rel err mean " + fmt(max_rel_mean) + ", std " + fmt(max_rel_sd) +
              "; largest relative SE " + fmt(se_floor)};
}

Check gradient_hygiene(Rng& rng) {
  double worst = 0.0;
  std::string worst_name;
  for (const auto& pc : oracle::primitive_cases()) {
    const double e = oracle::primitive_fd_error(pc, 64, rng);
    if (e >= worst) {
      worst = e;
      worst_name = pc.name;
    }
  }
  const double lp = oracle::grad_log_prob_fd_error(64, rng);
  return {worst <= 1e-5 && lp <= 1e-6,
          "primitives max err " + fmt(worst) + " (" + worst_name + "), grad_log_prob max err " + fmt(lp)};
}

struct EndToEnd {
  std::vector<std::string> certificate_csv;
  Check check;
};

EndToEnd end_to_end() {
  const auto cfg = pbsac::desk_config();
  const mdp::PointMass2D env;
  EndToEnd out;
  std::size_t improved = 0, certs = 0, sound = 0;
  double pb_sum = 0.0, sac_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t0 = Clock::now();
    std::ostringstream csv;
    pbsac::TrainOutputs to;
    to.certificates = &csv;
    const auto pb = pbsac::train_pbsac(env, cfg, seed, to);
    const auto base = sac::train_sac(env, cfg.sac, seed);
    out.certificate_csv.push_back(csv.str());
    const double lb0 = pb.certificates.front().certificate.certified_lower_bound;
    const double lb1 = pb.certificates.back().certificate.certified_lower_bound;
    improved += lb1 > lb0;
    for (const auto& c : pb.certificates) {
      ++certs;
      sound += c.certificate.certified_lower_bound <= c.certificate.empirical_return;
    }
    pb_sum += pb.final_return;
    sac_sum += base.final_return;
    std::fprintf(stderr, "  seed %2llu: LB %.3f -> %.3f over %zu certificates, return pb %.2f sac %.2f (%.0fs)\n",
                 (unsigned long long)seed, lb0, lb1, pb.certificates.size(), pb.final_return, base.final_return,
                 seconds_since(t0));
  }
  const double pb_mean = pb_sum / 10.0, sac_mean = sac_sum / 10.0;
  const double gap = std::abs(pb_mean - sac_mean) / std::abs(sac_mean);
  out.check = {improved >= 9 && sound == certs && gap <= 0.10,
               "LB improved in " + std::to_string(improved) + "/10 seeds; LB <= empirical return in " +
                   std::to_string(sound) + "/" + std::to_string(certs) + " certificates; mean return pb " +
                   fmt(pb_mean) + " vs sac " + fmt(sac_mean) + " (gap " + fmt(100.0 * gap) + "%)"};
  return out;
}

Check scaling_law(const std::vector<std::string>& csvs) {
  std::size_t rows = 0;
  double worst_emitted = 0.0, worst_ratio = 0.0;
  bool ok = !csvs.empty();
  for (const auto& text : csvs) {
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    ok = ok && line == "step,kl,delta,tau_min,T,H,gamma,r_max,kappa,kappa_star,deviation_bound,empirical_return,"
                       "certified_lower_bound";
    while (std::getline(is, line)) {
      std::vector<std::string> c;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) c.push_back(cell);
      if (c.size() != 13) {
        ok = false;
        continue;
      }
      ++rows;
      const double kl = std::stod(c[1]), delta = std::stod(c[2]), tau = std::stod(c[3]);
      const std::size_t T = std::stoul(c[4]), H = std::stoul(c[5]);
      const double gamma = std::stod(c[6]), r_max = std::stod(c[7]), emitted = std::stod(c[10]);
      const double b1 = oracle::deviation_bound_brute(r_max, gamma, H, T, tau, kl, delta);
      const double b2 = oracle::deviation_bound_brute(r_max, gamma, H, 2 * T, tau, kl, delta);
      cert::CertificateInputs in{r_max, gamma, cert::Horizon::finite(H), T, tau, kl, delta};
      const double l1 = cert::pac_bayes_bound(in);
      in.n_trajectories = 2 * T;
      const double l2 = cert::pac_bayes_bound(in);
      worst_emitted = std::max(worst_emitted, oracle::rel_err(b1, emitted));
      worst_ratio = std::max({worst_ratio, std::abs(b2 / b1 - std::numbers::sqrt2 / 2.0),
                              std::abs(l2 / l1 - std::numbers::sqrt2 / 2.0)});
    }
  }
  return {ok && rows > 0 && worst_emitted <= 1e-12 && worst_ratio <= 1e-12,
          std::to_string(rows) + " emitted certificates; recompute rel err " + fmt(worst_emitted) +
              ", max |ratio - 1/sqrt2| " + fmt(worst_ratio)};
}

}  // namespace

int main() {
  const SeedTree seeds(1);
  int failures = 0;
  auto report = [&](int id, const char* title, double limit_s, auto&& run) {
    const auto t0 = Clock::now();
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (limit_s > 0.0 && secs > limit_s) {
      c.pass = false;
      c.detail += "; over the " + fmt(limit_s) + " s budget";
    }
    failures += !c.pass;
    std::printf("%s %2d %s: %s [%.2fs]\n", c.pass ? "PASS" : "FAIL", id, title, c.detail.c_str(), secs);
    std::fflush(stdout);
  };

  Rng r2 = seeds.stream("bounded-differences"), r3 = seeds.stream("kappa"), r8 = seeds.stream("reinforce"),
      r9 = seeds.stream("finite-differences");
  report(1, "c-norm closed form vs brute force", 1.0, [] { return c_norm_grid(); });
  report(2, "bounded-differences equality", 1.0, [&] { return bounded_differences(r2); });
  report(3, "kappa-star optimality", 5.0, [&] { return kappa_optimality(r3); });

  std::optional<cli::ConcentrationOutcome> conc;
  const auto tc = Clock::now();
  std::string conc_error;
  try {
    conc = cli::verify_concentration(cli::ConcentrationArgs{});
  } catch (const std::exception& e) {
    conc_error = e.what();
  }
  const double conc_secs = seconds_since(tc);
  report(4, "bound validity on the chain MDP", 120.0, [&] {
    if (!conc) return Check{false, "concentration run failed: " + conc_error};
    auto c = bound_validity(*conc);
    c.detail += "; shared run " + fmt(conc_secs) + " s";
    return c;
  });
  report(5, "Markov-chain tail bound", 120.0, [&] {
    if (!conc) return Check{false, "concentration run failed: " + conc_error};
    return paulin_tails(*conc);
  });
  report(6, "exact mixing times", 1.0, [] { return exact_mixing(); });
  report(7, "counterexample reproduction", 0.0, [] { return counterexample(); });
  report(8, "policy-level REINFORCE unbiasedness", 10.0, [&] { return reinforce_unbiased(r8); });
  report(9, "gradient hygiene", 10.0, [&] { return gradient_hygiene(r9); });

  EndToEnd e2e;
  report(10, "end-to-end PB-SAC at desk scale", 900.0, [&] {
    e2e = end_to_end();
    return e2e.check;
  });
  report(11, "penalty scaling law", 0.0, [&] { return scaling_law(e2e.certificate_csv); });

  std::printf("%d of 11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
