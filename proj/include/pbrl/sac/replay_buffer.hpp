#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/core/error.hpp"
#include "pbrl/core/random.hpp"

namespace pbrl::sac {

struct Batch {
  ad::Tensor states;       // B x state_dim
  ad::Tensor actions;      // B x action_dim
  ad::Tensor rewards;      // B x 1
  ad::Tensor next_states;  // B x state_dim
  ad::Tensor dones;        // B x 1, 1 for terminal transitions

  std::size_t size() const { return rewards.rows(); }
};

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
      : capacity_(capacity), sd_(state_dim), ad_(action_dim) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    states_.resize(capacity * sd_);
    next_states_.resize(capacity * sd_);
    actions_.resize(capacity * ad_);
    rewards_.resize(capacity);
    dones_.resize(capacity);
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  void add(std::span<const double> s, std::span<const double> a, double r, std::span<const double> s2, bool done) {
    if (s.size() != sd_ || s2.size() != sd_ || a.size() != ad_)
      throw ConfigError("transition dimensions do not match the replay buffer");
    std::copy(s.begin(), s.end(), states_.begin() + head_ * sd_);
    std::copy(s2.begin(), s2.end(), next_states_.begin() + head_ * sd_);
    std::copy(a.begin(), a.end(), actions_.begin() + head_ * ad_);
    rewards_[head_] = r;
    dones_[head_] = done ? 1.0 : 0.0;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
  }

  /// Uniform batch without replacement (Floyd's algorithm, insertion order kept).
  Batch sample(std::size_t n, Rng& rng) const {
    if (n == 0 || n > size_)
      throw UsageError("cannot draw a batch of " + std::to_string(n) + " from " + std::to_string(size_) + " transitions");
    std::vector<std::size_t> idx;
    idx.reserve(n);
    for (std::size_t j = size_ - n; j < size_; ++j) {
      const std::size_t t = rng.index(j + 1);
      if (std::find(idx.begin(), idx.end(), t) == idx.end())
        idx.push_back(t);
      else
        idx.push_back(j);
    }
    return gather(idx);
  }

  Batch gather(std::span<const std::size_t> idx) const {
    const std::size_t n = idx.size();
    Batch b{ad::Tensor(n, sd_), ad::Tensor(n, ad_), ad::Tensor(n, 1), ad::Tensor(n, sd_), ad::Tensor(n, 1)};
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = idx[k];
      if (i >= size_) throw UsageError("replay index out of range");
      std::copy_n(states_.begin() + i * sd_, sd_, b.states.data().begin() + k * sd_);
      std::copy_n(next_states_.begin() + i * sd_, sd_, b.next_states.data().begin() + k * sd_);
      std::copy_n(actions_.begin() + i * ad_, ad_, b.actions.data().begin() + k * ad_);
      b.rewards[k] = rewards_[i];
      b.dones[k] = dones_[i];
    }
    return b;
  }

 private:
  std::size_t capacity_, sd_, ad_;
  std::size_t head_ = 0, size_ = 0;
  std::vector<double> states_, next_states_, actions_, rewards_, dones_;
};

}  // namespace pbrl::sac
