#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "pbrl/core/error.hpp"
#include "pbrl/mixing/mixing_time.hpp"

namespace pbrl::mixing {

/// Default cutoff on |autocorrelation|. With the x4 conversion below,
/// 1/e would undershoot the exact tau_min of geometric chains (their
/// exact value is about 6.2 / ln(1/lambda) while a 1/e cutoff gives
/// 4 / ln(1/lambda)); 0.1 gives 9.2 / ln(1/lambda).
inline constexpr double kDefaultAutocorrelationThreshold = 0.1;

/// Lag-to-tau_min conversion: the eps = 0 factor ((2-0)/(1-0))^2.
inline constexpr double kLagToTauFactor = 4.0;

/// Sample autocorrelation pooled over independent segments: lag products
/// are only formed within a segment, around the global mean.
class PooledAutocorrelation {
 public:
  explicit PooledAutocorrelation(std::vector<std::span<const double>> segments) : segments_(std::move(segments)) {
    double s = 0.0;
    for (auto seg : segments_) {
      for (double v : seg) {
        s += v;
        if (!first_) first_ = v;
        constant_ = constant_ && v == *first_;
      }
      total_ += seg.size();
      min_len_ = std::min(min_len_, seg.size());
    }
    if (total_ == 0) throw UsageError("autocorrelation of an empty series");
    mean_ = s / double(total_);
    double c0 = 0.0;
    for (auto seg : segments_)
      for (double v : seg) c0 += (v - mean_) * (v - mean_);
    c0_ = c0 / double(total_);
  }

  std::size_t total() const { return total_; }
  std::size_t min_segment() const { return min_len_; }
  double variance() const { return c0_; }
  bool constant() const { return constant_; }

  double at(std::size_t lag) const {
    double c = 0.0;
    std::size_t n = 0;
    for (auto seg : segments_) {
      if (seg.size() <= lag) continue;
      for (std::size_t t = 0; t + lag < seg.size(); ++t) c += (seg[t] - mean_) * (seg[t + lag] - mean_);
      n += seg.size() - lag;
    }
    if (n == 0) return 0.0;
    return (c / double(n)) / c0_;
  }

 private:
  std::vector<std::span<const double>> segments_;
  std::size_t total_ = 0;
  std::size_t min_len_ = static_cast<std::size_t>(-1);
  double mean_ = 0.0;
  double c0_ = 0.0;
  std::optional<double> first_;
  bool constant_ = true;
};

/// Smallest lag at which |autocorrelation| drops below the threshold,
/// times 4. Lags up to total/10 are considered (and below the shortest
/// segment). A constant series returns 4 with the degenerate flag.
inline MixingEstimate autocorrelation_tau(std::vector<std::span<const double>> segments,
                                          double threshold = kDefaultAutocorrelationThreshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("autocorrelation threshold must lie in (0, 1)");
  PooledAutocorrelation acf(std::move(segments));
  if (acf.total() < 10) throw UsageError("autocorrelation needs a series of at least 10 values");
  MixingEstimate est;
  est.method = MixingMethod::autocorrelation;
  if (acf.constant() || acf.variance() <= 1e-300) {
    est.tau_min = kLagToTauFactor;
    est.lag = 1;
    est.degenerate = true;
    return est;
  }
  const std::size_t max_lag = std::max<std::size_t>(1, std::min(acf.total() / 10, acf.min_segment() - 1));
  std::size_t lag = 1;
  for (; lag <= max_lag; ++lag)
    if (std::abs(acf.at(lag)) < threshold) break;
  if (lag > max_lag) est.truncated = true;
  est.lag = lag;
  est.tau_min = kLagToTauFactor * double(lag);
  return est;
}

inline MixingEstimate autocorrelation_tau(std::span<const double> series,
                                          double threshold = kDefaultAutocorrelationThreshold) {
  return autocorrelation_tau(std::vector<std::span<const double>>{series}, threshold);
}

}  // namespace pbrl::mixing
