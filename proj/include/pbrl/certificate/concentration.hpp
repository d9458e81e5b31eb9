#pragma once

// Monte Carlo checks of the concentration inequality and of the bound's
// coverage on tabular MDPs, where the true loss is available exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "pbrl/certificate/bound.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/returns.hpp"
#include "pbrl/mdp/rollout.hpp"
#include "pbrl/mdp/tabular_mdp.hpp"

namespace pbrl::cert {

namespace detail {

/// Runs body(i) for i in [0, n) over `workers` threads. Each index owns
/// its output slot, so results do not depend on the worker count.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  for (auto& t : pool) t.join();
}

/// L_hat of one freshly drawn dataset.
inline double sample_empirical_loss(const mdp::TabularMDP& mdp, const mdp::TabularPolicy& policy, std::size_t T,
                                    std::size_t H, Rng& rng) {
  mdp::TabularMDP env = mdp;
  double total = 0.0;
  for (std::size_t j = 0; j < T; ++j) {
    auto tr = mdp::rollout(env, policy, H, rng);
    total += mdp::discounted_return(tr, env.gamma());
  }
  return -total / double(T);
}

}  // namespace detail

struct TailRow {
  double threshold = 0.0;
  double observed = 0.0;   // fraction of repeats with |L_hat - L| >= threshold
  double bound = 0.0;      // 2 exp(-2 t^2 / (||c||^2 tau_min))
  double allowance = 0.0;  // 3 binomial standard errors at min(bound, 1)
  bool flagged = false;
};

struct ConcentrationReport {
  std::size_t repeats = 0;
  double true_loss = 0.0;
  double c_norm_sq = 0.0;
  double tau_min = 0.0;
  double mean_deviation = 0.0;  // mean of L_hat - L
  double deviation_std_error = 0.0;
  bool mean_consistent = true;  // |mean| <= 3 standard errors
  std::vector<double> deviations;
  std::vector<TailRow> rows;

  bool any_flagged() const {
    return std::any_of(rows.begin(), rows.end(), [](const TailRow& r) { return r.flagged; });
  }
};

/// Evenly spaced thresholds from 0 up to where the tail bound reaches 1/n.
inline std::vector<double> default_thresholds(double c_norm_sq_value, double tau_min, std::size_t n_repeats,
                                              std::size_t points = 20) {
  const double t_max = std::sqrt(c_norm_sq_value * tau_min * std::log(2.0 * double(std::max<std::size_t>(n_repeats, 1))) / 2.0);
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = points == 1 ? 0.0 : t_max * double(i) / double(points - 1);
  return g;
}

/// Draws n_repeats datasets of T trajectories of horizon H under the
/// policy and tabulates the two-sided tail frequency of L_hat - L against
/// the Markov-chain McDiarmid bound. Uses r_max, gamma, horizon,
/// n_trajectories, and tau_min from `inputs`.
inline ConcentrationReport concentration_check(const mdp::TabularMDP& mdp, const mdp::TabularPolicy& policy,
                                               const CertificateInputs& inputs, std::size_t n_repeats,
                                               std::span<const double> thresholds, std::uint64_t seed,
                                               std::size_t workers = 0) {
  if (n_repeats == 0) throw UsageError("concentration check needs at least one repeat");
  if (inputs.horizon.is_infinite()) throw UsageError("concentration check needs a finite horizon");
  const std::size_t T = inputs.n_trajectories, H = inputs.horizon.steps();

  ConcentrationReport rep;
  rep.repeats = n_repeats;
  rep.true_loss = -mdp::exact_value(mdp, policy, H);
  rep.c_norm_sq = c_norm_sq(inputs.r_max, mdp.gamma(), inputs.horizon, T);
  rep.tau_min = inputs.tau_min;
  rep.deviations.assign(n_repeats, 0.0);

  const SeedTree seeds(seed);
  detail::parallel_for(n_repeats, workers, [&](std::size_t i) {
    Rng rng = seeds.stream("concentration", i);
    rep.deviations[i] = detail::sample_empirical_loss(mdp, policy, T, H, rng) - rep.true_loss;
  });

  double s = 0.0, s2 = 0.0;
  for (double d : rep.deviations) s += d;
  rep.mean_deviation = s / double(n_repeats);
  for (double d : rep.deviations) s2 += (d - rep.mean_deviation) * (d - rep.mean_deviation);
  const double var = n_repeats > 1 ? s2 / double(n_repeats - 1) : 0.0;
  rep.deviation_std_error = std::sqrt(var / double(n_repeats));
  rep.mean_consistent = std::abs(rep.mean_deviation) <= 3.0 * rep.deviation_std_error + 1e-15;

  for (double t : thresholds) {
    TailRow row;
    row.threshold = t;
    std::size_t hits = 0;
    for (double d : rep.deviations) hits += std::abs(d) >= t ? 1 : 0;
    row.observed = double(hits) / double(n_repeats);
    row.bound = 2.0 * std::exp(-2.0 * t * t / (rep.c_norm_sq * rep.tau_min));
    const double p = std::min(row.bound, 1.0);
    row.allowance = 3.0 * std::sqrt(p * (1.0 - p) / double(n_repeats));
    row.flagged = row.observed > row.bound + row.allowance;
    rep.rows.push_back(row);
  }
  return rep;
}

struct ValidityReport {
  std::size_t repeats = 0;
  std::size_t violations = 0;
  double bound = 0.0;          // deviation bound at the posterior's KL
  double violation_rate = 0.0;
  double allowed_rate = 0.0;   // delta + 3 sqrt(delta (1 - delta) / repeats)
  bool ok = true;
};

/// Coverage of the deviation bound for a fixed posterior supported on a
/// finite set of tabular policies. Every repeat draws a fresh dataset of
/// T trajectories per policy and checks E_rho[L - L_hat] against the bound.
/// `inputs` carries KL, delta, tau_min, T, H; gamma and r_max come from
/// the MDP.
inline ValidityReport bound_validity_check(const mdp::TabularMDP& mdp, std::span<const mdp::TabularPolicy> support,
                                           std::span<const double> weights, CertificateInputs inputs,
                                           std::size_t n_repeats, std::uint64_t seed, std::size_t workers = 0) {
  if (n_repeats == 0) throw UsageError("bound validity check needs at least one repeat");
  if (support.empty() || support.size() != weights.size()) throw UsageError("posterior support and weights must match");
  inputs.gamma = mdp.gamma();
  inputs.r_max = mdp.r_max();
  const std::size_t T = inputs.n_trajectories, H = inputs.horizon.steps();

  ValidityReport rep;
  rep.repeats = n_repeats;
  rep.bound = pac_bayes_bound(inputs);
  rep.allowed_rate = inputs.delta + 3.0 * std::sqrt(inputs.delta * (1.0 - inputs.delta) / double(n_repeats));

  std::vector<double> true_loss(support.size());
  for (std::size_t k = 0; k < support.size(); ++k) true_loss[k] = -mdp::exact_value(mdp, support[k], H);

  std::vector<std::uint8_t> violated(n_repeats, 0);
  const SeedTree seeds(seed);
  detail::parallel_for(n_repeats, workers, [&](std::size_t i) {
    Rng rng = seeds.stream("validity", i);
    double gap = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k)
      gap += weights[k] * (true_loss[k] - detail::sample_empirical_loss(mdp, support[k], T, H, rng));
    violated[i] = gap > rep.bound ? 1 : 0;
  });
  for (auto v : violated) rep.violations += v;
  rep.violation_rate = double(rep.violations) / double(n_repeats);
  rep.ok = rep.violation_rate <= rep.allowed_rate;
  return rep;
}

}  // namespace pbrl::cert
