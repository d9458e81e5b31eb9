#pragma once

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "pbrl/autodiff/tape.hpp"
#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"

namespace pbrl::sac {

/// Fully connected network with ReLU hidden layers and a linear output.
/// Parameters are stored as W1, b1, W2, b2, ... with W_k of shape
/// fan_in x fan_out and b_k of shape 1 x fan_out.
class MLP {
 public:
  MLP() = default;

  /// sizes = {input, hidden..., output}. Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.
  MLP(std::vector<std::size_t> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ConfigError("an MLP needs input and output sizes");
    for (auto s : sizes_)
      if (s == 0) throw ConfigError("layer sizes must be positive");
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
      const double lim = 1.0 / std::sqrt(double(sizes_[k]));
      ad::Tensor w(sizes_[k], sizes_[k + 1]);
      ad::Tensor b(1, sizes_[k + 1]);
      for (auto& v : w.data()) v = rng.uniform(-lim, lim);
      for (auto& v : b.data()) v = rng.uniform(-lim, lim);
      params_.push_back(std::move(w));
      params_.push_back(std::move(b));
    }
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t layers() const { return sizes_.size() - 1; }

  std::vector<ad::Tensor>& params() { return params_; }
  const std::vector<ad::Tensor>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& p : params_)
      if (!p.all_finite()) return false;
    return true;
  }

  /// Forward pass on a tape. With `trainable` the parameters become named
  /// leaves (prefix + index) and their handles are appended to `leaves`.
  ad::Var forward(ad::Tape& tape, ad::Var x, bool trainable, std::vector<ad::Var>* leaves = nullptr,
                  const std::string& prefix = "p") const {
    ad::Var h = x;
    for (std::size_t k = 0; k < layers(); ++k) {
      ad::Var w = trainable ? tape.leaf(params_[2 * k], prefix + std::to_string(2 * k)) : tape.constant(params_[2 * k]);
      ad::Var b = trainable ? tape.leaf(params_[2 * k + 1], prefix + std::to_string(2 * k + 1))
                            : tape.constant(params_[2 * k + 1]);
      if (leaves) {
        leaves->push_back(w);
        leaves->push_back(b);
      }
      h = ad::add_bias(ad::matmul(h, w), b);
      if (k + 1 < layers()) h = ad::relu(h);
    }
    return h;
  }

  ad::Tensor infer(const ad::Tensor& x) const { return infer(params_, x); }

  /// Tape-free forward pass for an arbitrary parameter list of this shape.
  static ad::Tensor infer(const std::vector<ad::Tensor>& params, const ad::Tensor& x) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const RowMat>;
    if (params.size() % 2 != 0 || params.empty()) throw ConfigError("parameter list is not W/b pairs");
    RowMat h = CMap(x.ptr(), Eigen::Index(x.rows()), Eigen::Index(x.cols()));
    const std::size_t n_layers = params.size() / 2;
    for (std::size_t k = 0; k < n_layers; ++k) {
      const auto& w = params[2 * k];
      const auto& b = params[2 * k + 1];
      if (Eigen::Index(w.rows()) != h.cols())
        throw ConfigError("input width " + std::to_string(h.cols()) + " does not match layer " + std::to_string(k) +
                          " of shape " + w.shape_string());
      RowMat y = h * CMap(w.ptr(), Eigen::Index(w.rows()), Eigen::Index(w.cols()));
      y.rowwise() += CMap(b.ptr(), 1, Eigen::Index(b.cols())).row(0);
      if (k + 1 < n_layers) y = y.cwiseMax(0.0);
      h = std::move(y);
    }
    ad::Tensor out(std::size_t(h.rows()), std::size_t(h.cols()));
    Eigen::Map<RowMat>(out.ptr(), h.rows(), h.cols()) = h;
    return out;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<ad::Tensor> params_;
};

/// target <- tau * online + (1 - tau) * target, parameterwise.
inline void soft_update(const MLP& online, MLP& target, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("soft update coefficient must lie in [0, 1]");
  auto& tp = target.params();
  const auto& op = online.params();
  if (tp.size() != op.size()) throw ConfigError("soft update between networks of different shape");
  for (std::size_t b = 0; b < tp.size(); ++b) {
    if (!tp[b].same_shape(op[b])) throw ConfigError("soft update between networks of different shape");
    if (tau == 1.0) {
      tp[b] = op[b];
    } else if (tau > 0.0) {
      for (std::size_t i = 0; i < tp[b].size(); ++i) tp[b][i] = tau * op[b][i] + (1.0 - tau) * tp[b][i];
    }
  }
}

}  // namespace pbrl::sac
