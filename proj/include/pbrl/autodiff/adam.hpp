#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/core/error.hpp"

namespace pbrl::ad {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for a fixed list of parameter blocks.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }
  long step_count() const { return step_; }

  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

  /// One bias-corrected Adam update over matching parameter/gradient blocks.
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
    if (params.size() != grads.size()) throw ConfigError("adam: parameter and gradient block counts differ");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw ConfigError("adam: block count changed between steps");
    for (std::size_t b = 0; b < params.size(); ++b)
      if (params[b].size() != grads[b].size() || params[b].size() != m_[b].size())
        throw ConfigError("adam: block " + std::to_string(b) + " shape mismatch");

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto p = params[b];
      auto g = grads[b];
      auto& m = m_[b];
      auto& v = v_[b];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

  void step(std::span<double> params, std::span<const double> grads) {
    const std::span<double> p[] = {params};
    const std::span<const double> g[] = {grads};
    step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g));
  }

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    for (auto& t : params) p.push_back(t.span());
    for (const auto& t : grads) g.push_back(t.span());
    step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g));
  }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace pbrl::ad
