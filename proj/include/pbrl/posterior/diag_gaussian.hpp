#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"
#include "pbrl/posterior/flatten.hpp"

namespace pbrl::posterior {

/// N(mean, diag(std^2)) over flattened policy parameters. The standard
/// deviation is held as log std so gradient steps keep it positive.
class DiagGaussian {
 public:
  DiagGaussian() = default;

  DiagGaussian(std::vector<double> mean, std::span<const double> sd) : mean_(std::move(mean)) {
    if (sd.size() != mean_.size()) throw UsageError("mean and std lengths differ");
    log_std_.resize(sd.size());
    for (std::size_t i = 0; i < sd.size(); ++i) {
      if (!(sd[i] > 0.0) || !std::isfinite(sd[i])) throw UsageError("std must be positive and finite");
      log_std_[i] = std::log(sd[i]);
    }
  }

  DiagGaussian(std::vector<double> mean, double sd) : DiagGaussian(mean, std::vector<double>(mean.size(), sd)) {}

  static DiagGaussian from_log_std(std::vector<double> mean, std::vector<double> log_std) {
    if (mean.size() != log_std.size()) throw UsageError("mean and log std lengths differ");
    DiagGaussian d;
    d.mean_ = std::move(mean);
    d.log_std_ = std::move(log_std);
    return d;
  }

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  std::vector<double>& mutable_mean() { return mean_; }
  const std::vector<double>& log_std() const { return log_std_; }
  std::vector<double>& mutable_log_std() { return log_std_; }
  double std_at(std::size_t i) const { return std::exp(log_std_[i]); }

  std::vector<double> stddev() const {
    std::vector<double> s(log_std_.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_std_[i]);
    return s;
  }

  /// One draw mean + std * z.
  std::vector<double> sample(Rng& rng) const {
    std::vector<double> theta(mean_.size());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = mean_[i] + std::exp(log_std_[i]) * rng.normal();
    return theta;
  }

  std::vector<std::vector<double>> sample(Rng& rng, std::size_t n) const {
    if (n == 0) throw UsageError("sample count must be at least 1");
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(sample(rng));
    return out;
  }

  /// sum_i [ -ln(2 pi)/2 - ln std_i - (theta_i - mean_i)^2 / (2 std_i^2) ].
  double log_prob(std::span<const double> theta) const {
    check(theta);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    double lp = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double z = (theta[i] - mean_[i]) / std::exp(log_std_[i]);
      lp += -half_log_2pi - log_std_[i] - 0.5 * z * z;
    }
    return lp;
  }

  struct Score {
    std::vector<double> mean;  // d/d mean_i = (theta_i - mean_i) / std_i^2
    std::vector<double> sd;    // d/d std_i = ((theta_i - mean_i)^2 - std_i^2) / std_i^3
  };

  /// Gradient of log_prob(theta) with respect to (mean, std).
  Score grad_log_prob(std::span<const double> theta) const {
    check(theta);
    Score g{std::vector<double>(dim()), std::vector<double>(dim())};
    for (std::size_t i = 0; i < dim(); ++i) {
      const double s = std::exp(log_std_[i]);
      const double d = theta[i] - mean_[i];
      g.mean[i] = d / (s * s);
      g.sd[i] = (d * d - s * s) / (s * s * s);
    }
    return g;
  }

 private:
  void check(std::span<const double> theta) const {
    if (theta.size() != mean_.size()) throw UsageError("parameter vector length does not match the distribution");
  }

  std::vector<double> mean_;
  std::vector<double> log_std_;
};

/// KL(rho || mu) = sum_i [ ln(s_mu/s_rho) + (s_rho^2 + (m_rho - m_mu)^2) / (2 s_mu^2) - 1/2 ].
inline double kl_diag_gaussians(const DiagGaussian& rho, const DiagGaussian& mu) {
  if (rho.dim() != mu.dim()) throw UsageError("KL between distributions of different dimension");
  double kl = 0.0;
  for (std::size_t i = 0; i < rho.dim(); ++i) {
    const double ls_r = rho.log_std()[i], ls_m = mu.log_std()[i];
    const double ratio = std::exp(2.0 * (ls_r - ls_m));
    const double d = (rho.mean()[i] - mu.mean()[i]) / std::exp(ls_m);
    kl += (ls_m - ls_r) + 0.5 * (ratio + d * d) - 0.5;
  }
  return kl;
}

/// Analytic gradient of KL(rho || mu) with respect to rho's (mean, std).
inline DiagGaussian::Score kl_gradient(const DiagGaussian& rho, const DiagGaussian& mu) {
  if (rho.dim() != mu.dim()) throw UsageError("KL between distributions of different dimension");
  DiagGaussian::Score g{std::vector<double>(rho.dim()), std::vector<double>(rho.dim())};
  for (std::size_t i = 0; i < rho.dim(); ++i) {
    const double sr = rho.std_at(i), sm = mu.std_at(i);
    g.mean[i] = (rho.mean()[i] - mu.mean()[i]) / (sm * sm);
    g.sd[i] = -1.0 / sr + sr / (sm * sm);
  }
  return g;
}

/// Mean over samples of grad_log_prob(theta_k) * (return_k - b_k). With
/// `baseline` set, b_k is the mean of the other samples' returns, which
/// keeps the estimate unbiased at any batch size. This estimates the
/// gradient of E_rho[return]; minimising a loss means stepping against it.
inline DiagGaussian::Score reinforce_gradient(const DiagGaussian& dist, std::span<const std::vector<double>> thetas,
                                              std::span<const double> returns, bool baseline = true) {
  if (thetas.size() != returns.size()) throw UsageError("one return per sampled parameter vector is required");
  if (thetas.empty()) throw UsageError("reinforce gradient needs samples");
  if (baseline && thetas.size() < 2) throw UsageError("baseline subtraction needs at least two samples");
  double b = 0.0;
  if (baseline) {
    for (double r : returns) b += r;
    b /= double(returns.size());
  }
  DiagGaussian::Score g{std::vector<double>(dist.dim(), 0.0), std::vector<double>(dist.dim(), 0.0)};
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    if (!std::isfinite(returns[k])) throw NumericError("non-finite return for sample " + std::to_string(k));
    const double w = returns[k] - b;
    if (w == 0.0) continue;
    const auto s = dist.grad_log_prob(thetas[k]);
    for (std::size_t i = 0; i < dist.dim(); ++i) {
      g.mean[i] += w * s.mean[i];
      g.sd[i] += w * s.sd[i];
    }
  }
  // Leave-one-out: return_k - b_k = n / (n - 1) * (return_k - mean).
  const double n = double(thetas.size());
  const double inv = baseline ? 1.0 / (n - 1.0) : 1.0 / n;
  for (std::size_t i = 0; i < dist.dim(); ++i) {
    g.mean[i] *= inv;
    g.sd[i] *= inv;
  }
  return g;
}

/// Moving-average prior schedule. `decay` is the interpolation weight
/// toward the posterior; it drops by `decay_slope` after every update and
/// never goes below `floor`.
struct PriorSchedule {
  double decay = 0.99;
  double decay_slope = 0.01;
  double floor = 0.0;
  std::size_t update_period = 20000;
  std::size_t updates = 0;
};

/// Parameterwise interpolation mu <- decay * rho + (1 - decay) * mu on both
/// mean and std, then a linear decrement of decay.
inline DiagGaussian prior_update(const DiagGaussian& mu, const DiagGaussian& rho, PriorSchedule& schedule) {
  if (mu.dim() != rho.dim()) throw UsageError("prior and posterior dimensions differ");
  const double w = std::clamp(schedule.decay, 0.0, 1.0);
  std::vector<double> mean(mu.dim()), sd(mu.dim());
  for (std::size_t i = 0; i < mu.dim(); ++i) {
    if (w == 1.0) {
      mean[i] = rho.mean()[i];
      sd[i] = rho.std_at(i);
    } else if (w == 0.0) {
      mean[i] = mu.mean()[i];
      sd[i] = mu.std_at(i);
    } else {
      mean[i] = w * rho.mean()[i] + (1.0 - w) * mu.mean()[i];
      sd[i] = w * rho.std_at(i) + (1.0 - w) * mu.std_at(i);
    }
  }
  DiagGaussian out(std::move(mean), sd);
  // Exact endpoints keep the log std bit-identical to the source.
  if (w == 1.0) out = rho;
  if (w == 0.0) out = mu;
  schedule.decay = std::max(schedule.floor, std::clamp(schedule.decay - schedule.decay_slope, 0.0, 1.0));
  ++schedule.updates;
  return out;
}

struct GaussianCheckpoint {
  DiagGaussian dist;
  ShapeSpec shapes;
  double decay = 0.0;
  std::size_t step = 0;
};

/// Text format, version 1:
///   pbrl-gaussian v1
///   dimension <d>
///   shapes <k> <r0>x<c0> ...
///   decay <iota>
///   step <n>
///   mean <d values>
///   log_std <d values>
inline void save_gaussian(const std::string& path, const GaussianCheckpoint& ck) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot open '" + path + "' for writing");
  os.precision(17);
  os << "pbrl-gaussian v1\ndimension " << ck.dist.dim() << "\nshapes " << ck.shapes.size();
  for (auto [r, c] : ck.shapes) os << ' ' << r << 'x' << c;
  os << "\ndecay " << ck.decay << "\nstep " << ck.step << "\nmean";
  for (double v : ck.dist.mean()) os << ' ' << v;
  os << "\nlog_std";
  for (double v : ck.dist.log_std()) os << ' ' << v;
  os << '\n';
}

inline GaussianCheckpoint load_gaussian(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open checkpoint '" + path + "'");
  std::string magic, version, key;
  is >> magic >> version;
  if (magic != "pbrl-gaussian" || version != "v1") throw ValidationError("unsupported checkpoint format in '" + path + "'");
  GaussianCheckpoint ck;
  std::size_t dim = 0, nshapes = 0;
  is >> key >> dim >> key >> nshapes;
  for (std::size_t i = 0; i < nshapes; ++i) {
    std::string s;
    is >> s;
    auto x = s.find('x');
    if (x == std::string::npos) throw ValidationError("bad shape entry '" + s + "'");
    ck.shapes.emplace_back(std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1)));
  }
  is >> key >> ck.decay >> key >> ck.step >> key;
  std::vector<double> mean(dim), log_std(dim);
  for (auto& v : mean) is >> v;
  is >> key;
  for (auto& v : log_std) is >> v;
  if (!is) throw ValidationError("truncated checkpoint '" + path + "'");
  ck.dist = DiagGaussian::from_log_std(std::move(mean), std::move(log_std));
  return ck;
}

}  // namespace pbrl::posterior
