#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "pbrl/certificate/bound.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/mdp/returns.hpp"
#include "pbrl/mdp/trajectory.hpp"

namespace pbrl::cert {

struct BoundedDifferenceReport {
  std::optional<std::size_t> trajectory;  // empty when the datasets agree
  std::size_t first_step = 0;             // 1-based step h of the first changed transition
  double observed = 0.0;                  // |L_hat(D) - L_hat(D')|
  double bound = 0.0;                     // sum over h' >= h of c_(h', j)
  double slack = 0.0;                     // bound - observed
  bool holds = true;
};

namespace detail {

inline bool same_transition(const mdp::Transition& a, const mdp::Transition& b) {
  auto eq = [](auto x, auto y) { return std::equal(x.begin(), x.end(), y.begin(), y.end()); };
  return a.reward == b.reward && a.terminal == b.terminal && eq(a.state, b.state) && eq(a.action, b.action) &&
         eq(a.next_state, b.next_state);
}

}  // namespace detail

/// Compares the empirical-loss change between two datasets that differ in
/// one trajectory against the coefficient sum from the first changed step
/// to the end of the horizon.
inline BoundedDifferenceReport bounded_difference_check(const mdp::TrajectoryDataset& original,
                                                        const mdp::TrajectoryDataset& perturbed, double gamma,
                                                        double r_max, double tolerance = 1e-12) {
  if (original.count() != perturbed.count()) throw UsageError("datasets must hold the same number of trajectories");
  if (original.empty()) throw UsageError("datasets are empty");
  BoundedDifferenceReport rep;
  for (std::size_t j = 0; j < original.count(); ++j) {
    const auto& a = original.trajectories[j];
    const auto& b = perturbed.trajectories[j];
    std::optional<std::size_t> first;
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t t = 0; t < n && !first; ++t)
      if (t >= a.size() || t >= b.size() || !detail::same_transition(a[t], b[t])) first = t;
    if (!first) continue;
    if (rep.trajectory) throw UsageError("datasets differ in more than one trajectory");
    rep.trajectory = j;
    rep.first_step = *first + 1;
  }
  if (!rep.trajectory) return rep;

  const std::size_t T = original.count();
  const std::size_t H = original.horizon();
  for (std::size_t h = rep.first_step; h <= H; ++h) rep.bound += c_entry(r_max, gamma, h, T);
  rep.observed = std::abs(mdp::empirical_loss(original, gamma) - mdp::empirical_loss(perturbed, gamma));
  rep.slack = rep.bound - rep.observed;
  rep.holds = rep.observed <= rep.bound + tolerance;
  return rep;
}

}  // namespace pbrl::cert
