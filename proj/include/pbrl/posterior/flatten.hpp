#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/core/error.hpp"

namespace pbrl::posterior {

/// Shapes of the parameter blocks in flattening order.
using ShapeSpec = std::vector<std::pair<std::size_t, std::size_t>>;

inline std::size_t total_size(const ShapeSpec& spec) {
  std::size_t n = 0;
  for (auto [r, c] : spec) n += r * c;
  return n;
}

inline ShapeSpec shape_spec(const std::vector<ad::Tensor>& params) {
  ShapeSpec s;
  for (const auto& t : params) s.emplace_back(t.rows(), t.cols());
  return s;
}

/// Concatenates blocks in order, each block row-major. For an MLP the
/// blocks are W1, b1, W2, b2, ... (layer-major).
inline std::vector<double> flatten(const std::vector<ad::Tensor>& params) {
  std::vector<double> out;
  out.reserve(total_size(shape_spec(params)));
  for (const auto& t : params) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

inline std::vector<ad::Tensor> unflatten(std::span<const double> flat, const ShapeSpec& spec) {
  if (flat.size() != total_size(spec))
    throw UsageError("unflatten: vector of length " + std::to_string(flat.size()) + " does not match shape spec of " +
                     std::to_string(total_size(spec)));
  std::vector<ad::Tensor> out;
  std::size_t off = 0;
  for (auto [r, c] : spec) {
    out.emplace_back(r, c, std::vector<double>(flat.begin() + off, flat.begin() + off + r * c));
    off += r * c;
  }
  return out;
}

/// Overwrites existing blocks in place.
inline void assign(std::vector<ad::Tensor>& params, std::span<const double> flat) {
  std::size_t off = 0;
  for (auto& t : params) {
    if (off + t.size() > flat.size()) throw UsageError("assign: flat vector too short");
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data().begin());
    off += t.size();
  }
  if (off != flat.size()) throw UsageError("assign: flat vector too long");
}

}  // namespace pbrl::posterior
