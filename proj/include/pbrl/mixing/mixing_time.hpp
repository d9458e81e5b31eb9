#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pbrl/core/error.hpp"
#include "pbrl/mixing/markov_chain.hpp"

namespace pbrl::mixing {

enum class MixingMethod { exact, autocorrelation, conservative };

inline const char* to_string(MixingMethod m) {
  switch (m) {
    case MixingMethod::exact: return "exact";
    case MixingMethod::autocorrelation: return "autocorrelation";
    case MixingMethod::conservative: return "conservative";
  }
  return "?";
}

struct MixingEstimate {
  double tau_min = 4.0;
  MixingMethod method = MixingMethod::exact;
  double epsilon_star = 0.0;  // minimiser on the grid; exact method only
  std::size_t tau_at_epsilon_star = 1;
  std::size_t lag = 0;          // autocorrelation method: first lag below threshold
  bool degenerate = false;      // autocorrelation of a constant series
  bool truncated = false;       // no lag below threshold within the allowed range
};

/// Largest step count searched before a chain is declared non-mixing.
inline constexpr std::uint64_t kMixingCap = 1'000'000;

/// (1/2) sum |p_i - q_i|.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw UsageError("tv_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// Max over state pairs of the TV distance between rows of m.
inline double max_row_tv(const Eigen::MatrixXd& m) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < m.rows(); ++x)
    for (Eigen::Index y = x + 1; y < m.rows(); ++y)
      worst = std::max(worst, 0.5 * (m.row(x) - m.row(y)).cwiseAbs().sum());
  return worst;
}

/// Caches P^(2^k) and the row-TV profile so many tolerances can be
/// answered from one doubling pass. d(t) = max row TV of P^t is
/// nonincreasing in t, which makes the binary refinement valid.
class MixingProfile {
 public:
  explicit MixingProfile(const MarkovChain& chain) {
    powers_.push_back(chain.matrix());
    dists_.push_back(max_row_tv(chain.matrix()));
  }

  /// Smallest t >= 1 with d(t) <= epsilon.
  std::uint64_t mixing_time(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw UsageError("epsilon must lie in [0, 1)");
    std::size_t k = 0;
    while (dists_[k] > epsilon) {
      if ((std::uint64_t(1) << k) >= kMixingCap)
        throw MixingError("mixing time infinite/undetected: rows still " + std::to_string(dists_[k]) +
                          " apart in total variation after " + std::to_string(std::uint64_t(1) << k) + " steps");
      ++k;
      if (k == powers_.size()) {
        powers_.push_back(powers_.back() * powers_.back());
        dists_.push_back(max_row_tv(powers_.back()));
      }
    }
    if (k == 0) return 1;
    // d(2^(k-1)) > epsilon >= d(2^k): lift bits below k-1.
    std::uint64_t lo = std::uint64_t(1) << (k - 1);
    Eigen::MatrixXd cur = powers_[k - 1];
    for (std::size_t j = k - 1; j-- > 0;) {
      Eigen::MatrixXd cand = cur * powers_[j];
      if (max_row_tv(cand) > epsilon) {
        cur = std::move(cand);
        lo += std::uint64_t(1) << j;
      }
    }
    const std::uint64_t t = lo + 1;
    if (t > kMixingCap) throw MixingError("mixing time infinite/undetected: exceeds cap of " + std::to_string(kMixingCap));
    return t;
  }

 private:
  std::vector<Eigen::MatrixXd> powers_;
  std::vector<double> dists_;
};

/// tau(epsilon): fewest steps after which rows of P^t are within epsilon
/// in total variation.
inline std::uint64_t mixing_time_exact(const MarkovChain& chain, double epsilon) {
  MixingProfile profile(chain);
  return profile.mixing_time(epsilon);
}

/// ((2 - eps) / (1 - eps))^2.
inline double mixing_factor(double epsilon) {
  const double r = (2.0 - epsilon) / (1.0 - epsilon);
  return r * r;
}

/// 0 followed by (n - 1) log-spaced points in [1e-6, 0.99].
inline std::vector<double> default_epsilon_grid(std::size_t n = 512) {
  if (n < 2) throw UsageError("epsilon grid needs at least two points");
  std::vector<double> g{0.0};
  const double lo = std::log(1e-6), hi = std::log(0.99);
  for (std::size_t i = 0; i + 1 < n; ++i) g.push_back(std::exp(lo + (hi - lo) * double(i) / double(n - 2)));
  return g;
}

/// min over the grid of tau(eps) * ((2 - eps)/(1 - eps))^2. Grid points
/// where the chain never reaches the tolerance (eps = 0 for most chains)
/// are skipped; if every point is unreachable the error propagates.
inline MixingEstimate tau_min_exact(const MarkovChain& chain, std::span<const double> epsilon_grid) {
  if (epsilon_grid.empty()) throw UsageError("epsilon grid is empty");
  MixingProfile profile(chain);
  MixingEstimate best;
  best.tau_min = std::numeric_limits<double>::infinity();
  std::string last_error;
  for (double eps : epsilon_grid) {
    if (!(eps >= 0.0 && eps < 1.0)) throw UsageError("epsilon grid must lie in [0, 1)");
    std::uint64_t t = 0;
    try {
      t = profile.mixing_time(eps);
    } catch (const MixingError& e) {
      last_error = e.what();
      continue;
    }
    const double v = double(t) * mixing_factor(eps);
    if (v < best.tau_min) {
      best.tau_min = v;
      best.epsilon_star = eps;
      best.tau_at_epsilon_star = t;
    }
  }
  if (!std::isfinite(best.tau_min)) throw MixingError(last_error);
  best.method = MixingMethod::exact;
  return best;
}

inline MixingEstimate tau_min_exact(const MarkovChain& chain) {
  auto grid = default_epsilon_grid();
  return tau_min_exact(chain, grid);
}

/// Running maximum; never lets the estimate shrink.
inline MixingEstimate conservative_tau(const MixingEstimate& previous, const MixingEstimate& latest) {
  if (!std::isfinite(previous.tau_min) || !std::isfinite(latest.tau_min))
    throw UsageError("conservative_tau needs finite estimates");
  MixingEstimate out = previous.tau_min >= latest.tau_min ? previous : latest;
  out.method = MixingMethod::conservative;
  return out;
}

}  // namespace pbrl::mixing
