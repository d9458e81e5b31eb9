#pragma once

#include <span>

#include "pbrl/core/error.hpp"
#include "pbrl/mdp/trajectory.hpp"

namespace pbrl::mdp {

/// Sum over k of gamma^k * rewards[k]. A terminal step ends the sum; the
/// stored rewards already stop there.
inline double discounted_return(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw UsageError("discounted return of an empty trajectory");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw UsageError("gamma must lie in [0, 1]");
  double g = 0.0;
  double w = 1.0;
  for (double r : rewards) {
    g += w * r;
    w *= gamma;
  }
  return g;
}

inline double discounted_return(const Trajectory& trajectory, double gamma) {
  return discounted_return(trajectory.rewards(), gamma);
}

/// Negative mean discounted return over the dataset.
inline double empirical_loss(const TrajectoryDataset& dataset, double gamma) {
  if (dataset.empty()) throw UsageError("empirical loss of an empty dataset");
  double total = 0.0;
  for (const auto& tr : dataset.trajectories) total += discounted_return(tr, gamma);
  return -total / double(dataset.count());
}

}  // namespace pbrl::mdp
