#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pbrl/certificate/bound.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/mdp/tabular_mdp.hpp"
#include "pbrl/mixing/mixing_time.hpp"

namespace pbrl::cert {

/// A fixed posterior over a handful of softmax policies on the drift chain,
/// with everything needed to check the certificate against exact values.
struct ChainExperiment {
  mdp::TabularMDP mdp;
  std::vector<mdp::TabularPolicy> support;
  std::vector<double> weights;  // posterior; the prior is uniform over `support`
  double kl = 0.0;
  double tau_min = 0.0;  // largest exact tau_min over the support's induced chains
  std::size_t n_trajectories = 8;
  std::size_t horizon = 16;
  double delta = 0.1;

  CertificateInputs inputs() const {
    CertificateInputs in;
    in.r_max = mdp.r_max();
    in.gamma = mdp.gamma();
    in.horizon = Horizon::finite(horizon);
    in.n_trajectories = n_trajectories;
    in.tau_min = tau_min;
    in.kl = kl;
    in.delta = delta;
    return in;
  }

  /// Posterior-weighted exact value over the horizon.
  double expected_value() const {
    double v = 0.0;
    for (std::size_t k = 0; k < support.size(); ++k) v += weights[k] * mdp::exact_value(mdp, support[k], horizon);
    return v;
  }
};

/// Parses "chain-<n>"; anything else is not a tabular environment.
inline std::size_t parse_chain_name(const std::string& name) {
  const std::string prefix = "chain-";
  if (name.rfind(prefix, 0) != 0 || name.size() == prefix.size() ||
      name.find_first_not_of("0123456789", prefix.size()) != std::string::npos)
    throw UsageError("unknown tabular environment '" + name + "' (expected chain-<n>, e.g. chain-5)");
  return std::stoul(name.substr(prefix.size()));
}

inline ChainExperiment make_chain_experiment(std::size_t n_states = 5, std::size_t n_policies = 8, std::size_t T = 8,
                                             std::size_t H = 16, double delta = 0.1) {
  if (n_policies == 0) throw UsageError("posterior support must be nonempty");
  if (T == 0 || H == 0) throw UsageError("T and H must be positive");
  ChainExperiment ex{mdp::make_chain_mdp(n_states), {}, {}, 0.0, 0.0, T, H, delta};
  const auto S = Eigen::Index(n_states);
  double z = 0.0;
  for (std::size_t k = 0; k < n_policies; ++k) {
    // Preference for moving right ranges from strongly left to strongly
    // right; odd members lean further right near the far wall.
    Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(S, 2);
    for (Eigen::Index s = 0; s < S; ++s)
      logits(s, 1) = 0.6 * (double(k) - 0.5 * double(n_policies - 1)) + (k % 2 ? 0.15 : -0.15) * double(s);
    ex.support.push_back(mdp::TabularPolicy::softmax(logits));
    ex.weights.push_back(std::exp(-0.3 * double(k)));
    z += ex.weights.back();
  }
  for (auto& w : ex.weights) {
    w /= z;
    ex.kl += w * std::log(w * double(n_policies));
  }
  ex.kl = std::max(ex.kl, 0.0);
  for (const auto& p : ex.support)
    ex.tau_min = std::max(ex.tau_min, mixing::tau_min_exact(mixing::MarkovChain(mdp::induced_chain(ex.mdp, p))).tau_min);
  return ex;
}

}  // namespace pbrl::cert
