#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace pbrl {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Seeded generator. All randomness in the library flows through this type.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  /// Draws from a discrete distribution given by (unnormalised) weights.
  std::size_t categorical(std::span<const double> probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // Rounding left a sliver above the cumulative sum.
    for (std::size_t i = probs.size(); i-- > 0;)
      if (probs[i] > 0.0) return i;
    return probs.size() - 1;
  }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

  std::uint64_t next_u64() { return engine_(); }

  engine_type& engine() { return engine_; }

 private:
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Derives independent named streams from one root seed. A stream is
/// identified by a purpose label and an index, so adding a new consumer
/// never shifts the draws seen by existing ones.
class SeedTree {
 public:
  explicit SeedTree(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const { return root_; }

  std::uint64_t seed(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t h = detail::splitmix64(root_ ^ detail::fnv1a(label));
    return detail::splitmix64(h + detail::splitmix64(index + 0x632BE59BD9B4E019ULL));
  }

  Rng stream(std::string_view label, std::uint64_t index = 0) const { return Rng(seed(label, index)); }

  SeedTree child(std::string_view label, std::uint64_t index = 0) const { return SeedTree(seed(label, index)); }

 private:
  std::uint64_t root_;
};

}  // namespace pbrl
