#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "pbrl/autodiff/adam.hpp"
#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/mdp/environment.hpp"
#include "pbrl/sac/mlp.hpp"

namespace pbrl::sac {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// ln(1 - tanh(u)^2) = 2 (ln 2 - u - softplus(-2u)), stable for large |u|.
inline double log_one_minus_tanh_sq(double u) {
  const double x = -2.0 * u;
  const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - sp);
}

/// Density of a = tanh(m + s z) at pre-squash point u with noise z.
inline double squashed_log_prob(std::span<const double> log_std, std::span<const double> z,
                                std::span<const double> u) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    lp += -0.5 * z[i] * z[i] - log_std[i] - half_log_2pi - log_one_minus_tanh_sq(u[i]);
  return lp;
}

/// Mean and clamped log std for a batch of states.
struct PolicyHead {
  ad::Tensor mean;     // B x action_dim
  ad::Tensor log_std;  // B x action_dim
};

/// Tanh-squashed diagonal Gaussian policy. The network emits
/// [mean | log_std] per state.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;

  GaussianPolicy(std::size_t state_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden, Rng& rng,
                 ad::AdamConfig opt = {})
      : action_dim_(action_dim), opt_(opt) {
    std::vector<std::size_t> sizes{state_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(2 * action_dim);
    net_ = MLP(sizes, rng);
  }

  std::size_t state_dim() const { return net_.input_dim(); }
  std::size_t action_dim() const { return action_dim_; }
  MLP& net() { return net_; }
  const MLP& net() const { return net_; }
  std::vector<ad::Tensor>& params() { return net_.params(); }
  const std::vector<ad::Tensor>& params() const { return net_.params(); }
  ad::AdamState& optimizer() { return opt_; }

  PolicyHead head(const ad::Tensor& states) const { return head(net_.params(), states, action_dim_); }

  static PolicyHead head(const std::vector<ad::Tensor>& params, const ad::Tensor& states, std::size_t action_dim) {
    ad::Tensor out = MLP::infer(params, states);
    if (!out.all_finite()) throw NumericError("policy network produced a non-finite output");
    PolicyHead h{ad::Tensor(states.rows(), action_dim), ad::Tensor(states.rows(), action_dim)};
    for (std::size_t r = 0; r < states.rows(); ++r)
      for (std::size_t c = 0; c < action_dim; ++c) {
        h.mean(r, c) = out(r, c);
        h.log_std(r, c) = std::clamp(out(r, action_dim + c), kLogStdMin, kLogStdMax);
      }
    return h;
  }

  /// Stochastic: a = tanh(m + s z) with the squash-corrected log density.
  /// Deterministic: a = tanh(m), log density evaluated at z = 0.
  mdp::ActionSample act(std::span<const double> state, Rng& rng, bool deterministic = false) const {
    return act(net_.params(), state, rng, deterministic);
  }

  mdp::ActionSample act(const std::vector<ad::Tensor>& params, std::span<const double> state, Rng& rng,
                        bool deterministic = false) const {
    for (double v : state)
      if (!std::isfinite(v)) throw NumericError("non-finite state passed to the policy");
    PolicyHead h = head(params, ad::Tensor::row(state), action_dim_);
    std::vector<double> z(action_dim_, 0.0), u(action_dim_);
    mdp::ActionSample out;
    out.action.resize(action_dim_);
    for (std::size_t i = 0; i < action_dim_; ++i) {
      if (!deterministic) z[i] = rng.normal();
      u[i] = h.mean[i] + std::exp(h.log_std[i]) * z[i];
      out.action[i] = std::tanh(u[i]);
    }
    out.log_prob = squashed_log_prob(h.log_std.span(), z, u);
    return out;
  }

  /// Log density of a stored action, recovering u = atanh(a). Actions are
  /// pulled inside (-1, 1) first so saturated samples stay finite.
  static double log_prob_of_action(const PolicyHead& h, std::size_t row, std::span<const double> action) {
    const std::size_t d = h.mean.cols();
    if (action.size() != d) throw UsageError("action dimension does not match the policy");
    constexpr double lim = 1.0 - 1e-12;
    std::vector<double> z(d), u(d), ls(d);
    for (std::size_t i = 0; i < d; ++i) {
      u[i] = std::atanh(std::clamp(action[i], -lim, lim));
      ls[i] = h.log_std(row, i);
      z[i] = (u[i] - h.mean(row, i)) / std::exp(ls[i]);
    }
    return squashed_log_prob(ls, z, u);
  }

 private:
  MLP net_;
  std::size_t action_dim_ = 0;
  ad::AdamState opt_;
};

}  // namespace pbrl::sac
