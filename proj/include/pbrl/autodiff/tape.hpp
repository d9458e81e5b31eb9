#pragma once

// Define-by-run reverse-mode differentiation over 2-D tensors.
//
// A Tape is rebuilt for each forward pass. Every primitive appends one node
// holding its value, the indices of its parents, and a closure that pushes
// the node's adjoint back into the parents. Parents always precede
// children, so a single reverse sweep visits each node exactly once.

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pbrl/autodiff/tensor.hpp"
#include "pbrl/core/error.hpp"

namespace pbrl::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input. Named leaves are reported by gradients().
  Var leaf(Tensor value, std::string name = {}) { return push(std::move(value), "leaf", {}, {}, true, std::move(name)); }

  /// Non-differentiable input.
  Var constant(Tensor value, std::string name = {}) {
    return push(std::move(value), "const", {}, {}, false, std::move(name));
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }
  const std::string& op_name(Var v) const { return nodes_.at(v.id).op; }

  /// Seeds the output adjoint with 1; the output must be a scalar.
  void backward(Var out) {
    if (value(out).size() != 1)
      throw UsageError("backward without an adjoint needs a scalar output, got " + value(out).shape_string());
    backward(out, Tensor::scalar(1.0));
  }

  void backward(Var out, const Tensor& adjoint) {
    if (!adjoint.same_shape(value(out)))
      throw ConfigError("adjoint shape " + adjoint.shape_string() + " does not match output " + value(out).shape_string());
    for (auto& n : nodes_) n.grad = Tensor::zeros_like(n.value);
    nodes_[out.id].grad = adjoint;
    for (std::size_t i = out.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.backward) n.backward(*this, i);
    }
  }

  /// Gradients of every named leaf after backward().
  std::map<std::string, Tensor> gradients() const {
    std::map<std::string, Tensor> out;
    for (const auto& n : nodes_)
      if (n.op == "leaf" && !n.name.empty()) out.emplace(n.name, n.grad);
    return out;
  }

  /// Looks up a named input or leaf.
  Var find(const std::string& name) {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].name == name) return Var{this, i};
    throw UsageError("no tape node named '" + name + "'");
  }

  // Used by primitives.
  Var push(Tensor value, std::string op, std::vector<std::size_t> parents, Backward backward, bool requires_grad,
           std::string name = {}) {
    if (!value.all_finite())
      throw NumericError("non-finite value produced by node #" + std::to_string(nodes_.size()) + " (" + op + ")");
    nodes_.push_back(Node{std::move(value), {}, std::move(op), std::move(name), std::move(parents),
                          std::move(backward), requires_grad});
    return Var{this, nodes_.size() - 1};
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& value_at(std::size_t id) const { return nodes_[id].value; }
  Tensor& grad_at(std::size_t id) { return nodes_[id].grad; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::string op;
    std::string name;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

inline MapMat map(Tensor& t) { return MapMat(t.ptr(), Eigen::Index(t.rows()), Eigen::Index(t.cols())); }
inline CMapMat map(const Tensor& t) { return CMapMat(t.ptr(), Eigen::Index(t.rows()), Eigen::Index(t.cols())); }

inline Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw UsageError("operands live on different tapes");
  return *a.tape;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ConfigError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

// Elementwise unary primitive; dfdx receives (x, y) and returns dy/dx.
template <class F, class D>
Var unary(Var a, const char* op, F f, D dfdx) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t pa = a.id;
  return t.push(std::move(y), op, {pa},
                [pa, dfdx](Tape& tp, std::size_t self) {
                  if (!tp.requires_grad(pa)) return;
                  const Tensor& xv = tp.value_at(pa);
                  const Tensor& yv = tp.value_at(self);
                  const Tensor& g = tp.grad_at(self);
                  Tensor& gp = tp.grad_at(pa);
                  for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * dfdx(xv[i], yv[i]);
                },
                t.requires_grad(pa));
}

}  // namespace detail

/// a [m x k] times b [k x n].
inline Var matmul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& x = t.value(a);
  const Tensor& w = t.value(b);
  if (x.cols() != w.rows())
    throw ConfigError("matmul: inner dimensions differ (" + x.shape_string() + " * " + w.shape_string() + ")");
  Tensor y(x.rows(), w.cols());
  detail::map(y).noalias() = detail::map(x) * detail::map(w);
  const std::size_t pa = a.id, pb = b.id;
  return t.push(std::move(y), "matmul", {pa, pb},
                [pa, pb](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  if (tp.requires_grad(pa))
                    detail::map(tp.grad_at(pa)).noalias() += detail::map(g) * detail::map(tp.value_at(pb)).transpose();
                  if (tp.requires_grad(pb))
                    detail::map(tp.grad_at(pb)).noalias() += detail::map(tp.value_at(pa)).transpose() * detail::map(g);
                },
                t.requires_grad(pa) || t.requires_grad(pb));
}

/// Elementwise sum of equal shapes.
inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape(t.value(a), t.value(b), "add");
  Tensor y = t.value(a);
  y += t.value(b);
  const std::size_t pa = a.id, pb = b.id;
  return t.push(std::move(y), "add", {pa, pb},
                [pa, pb](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  if (tp.requires_grad(pa)) tp.grad_at(pa) += g;
                  if (tp.requires_grad(pb)) tp.grad_at(pb) += g;
                },
                t.requires_grad(pa) || t.requires_grad(pb));
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape(t.value(a), t.value(b), "sub");
  Tensor y = t.value(a);
  const Tensor& bv = t.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::size_t pa = a.id, pb = b.id;
  return t.push(std::move(y), "sub", {pa, pb},
                [pa, pb](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  if (tp.requires_grad(pa)) tp.grad_at(pa) += g;
                  if (tp.requires_grad(pb)) {
                    Tensor& gb = tp.grad_at(pb);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                  }
                },
                t.requires_grad(pa) || t.requires_grad(pb));
}

/// Elementwise product of equal shapes.
inline Var mul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape(t.value(a), t.value(b), "mul");
  Tensor y = t.value(a);
  const Tensor& bv = t.value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t pa = a.id, pb = b.id;
  return t.push(std::move(y), "mul", {pa, pb},
                [pa, pb](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  const Tensor& av = tp.value_at(pa);
                  const Tensor& bv2 = tp.value_at(pb);
                  if (tp.requires_grad(pa)) {
                    Tensor& ga = tp.grad_at(pa);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
                  }
                  if (tp.requires_grad(pb)) {
                    Tensor& gb = tp.grad_at(pb);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                  }
                },
                t.requires_grad(pa) || t.requires_grad(pb));
}

/// Elementwise minimum; ties route the adjoint to the first operand.
inline Var minimum(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::check_same_shape(t.value(a), t.value(b), "minimum");
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  Tensor y(av.rows(), av.cols());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] <= bv[i] ? av[i] : bv[i];
  const std::size_t pa = a.id, pb = b.id;
  return t.push(std::move(y), "minimum", {pa, pb},
                [pa, pb](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  const Tensor& x = tp.value_at(pa);
                  const Tensor& z = tp.value_at(pb);
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    bool first = x[i] <= z[i];
                    if (first && tp.requires_grad(pa)) tp.grad_at(pa)[i] += g[i];
                    if (!first && tp.requires_grad(pb)) tp.grad_at(pb)[i] += g[i];
                  }
                },
                t.requires_grad(pa) || t.requires_grad(pb));
}

/// Adds a 1 x n bias row to every row of an m x n tensor.
inline Var add_bias(Var a, Var bias) {
  Tape& t = detail::same_tape(a, bias);
  const Tensor& x = t.value(a);
  const Tensor& b = t.value(bias);
  if (b.rows() != 1 || b.cols() != x.cols())
    throw ConfigError("add_bias: bias " + b.shape_string() + " does not broadcast over " + x.shape_string());
  Tensor y = x;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b[c];
  const std::size_t pa = a.id, pb = bias.id;
  return t.push(std::move(y), "add_bias", {pa, pb},
                [pa, pb](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  if (tp.requires_grad(pa)) tp.grad_at(pa) += g;
                  if (tp.requires_grad(pb)) {
                    Tensor& gb = tp.grad_at(pb);
                    for (std::size_t r = 0; r < g.rows(); ++r)
                      for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
                  }
                },
                t.requires_grad(pa) || t.requires_grad(pb));
}

inline Var scale(Var a, double s) {
  return detail::unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var add_scalar(Var a, double s) {
  return detail::unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var tanh(Var a) {
  return detail::unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var relu(Var a) {
  return detail::unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                       [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var exp(Var a) {
  return detail::unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(Var a) {
  return detail::unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var square(Var a) {
  return detail::unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

/// log(1 + e^x) without overflow.
inline Var softplus(Var a) {
  return detail::unary(
      a, "softplus", [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

/// Clamps to [lo, hi]; the adjoint is zero outside the interval.
inline Var clamp(Var a, double lo, double hi) {
  return detail::unary(a, "clamp", [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
                       [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

/// Sum of all entries, as a 1 x 1 tensor.
inline Var sum(Var a) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  double s = 0.0;
  for (double v : x.data()) s += v;
  const std::size_t pa = a.id;
  return t.push(Tensor::scalar(s), "sum", {pa},
                [pa](Tape& tp, std::size_t self) {
                  if (!tp.requires_grad(pa)) return;
                  double g = tp.grad_at(self)[0];
                  for (double& v : tp.grad_at(pa).data()) v += g;
                },
                t.requires_grad(pa));
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.tape->value(a).size());
  return scale(sum(a), 1.0 / n);
}

/// Per-row sums: m x n -> m x 1.
inline Var sum_rows(Var a) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  Tensor y(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) y[r] += x(r, c);
  const std::size_t pa = a.id;
  return t.push(std::move(y), "sum_rows", {pa},
                [pa](Tape& tp, std::size_t self) {
                  if (!tp.requires_grad(pa)) return;
                  const Tensor& g = tp.grad_at(self);
                  Tensor& gp = tp.grad_at(pa);
                  for (std::size_t r = 0; r < gp.rows(); ++r)
                    for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g[r];
                },
                t.requires_grad(pa));
}

/// Column slice [begin, begin + count) of an m x n tensor.
inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape;
  const Tensor& x = t.value(a);
  if (begin + count > x.cols()) throw ConfigError("slice_cols: range exceeds " + x.shape_string());
  Tensor y(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) y(r, c) = x(r, begin + c);
  const std::size_t pa = a.id;
  return t.push(std::move(y), "slice_cols", {pa},
                [pa, begin, count](Tape& tp, std::size_t self) {
                  if (!tp.requires_grad(pa)) return;
                  const Tensor& g = tp.grad_at(self);
                  Tensor& gp = tp.grad_at(pa);
                  for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < count; ++c) gp(r, begin + c) += g(r, c);
                },
                t.requires_grad(pa));
}

/// [a | b]: column concatenation of tensors with equal row counts.
inline Var concat_cols(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& x = t.value(a);
  const Tensor& z = t.value(b);
  if (x.rows() != z.rows()) throw ConfigError("concat_cols: row counts differ (" + x.shape_string() + ", " + z.shape_string() + ")");
  const std::size_t ca = x.cols(), cb = z.cols();
  Tensor y(x.rows(), ca + cb);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) y(r, c) = x(r, c);
    for (std::size_t c = 0; c < cb; ++c) y(r, ca + c) = z(r, c);
  }
  const std::size_t pa = a.id, pb = b.id;
  return t.push(std::move(y), "concat_cols", {pa, pb},
                [pa, pb, ca, cb](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad_at(self);
                  for (std::size_t r = 0; r < g.rows(); ++r) {
                    if (tp.requires_grad(pa))
                      for (std::size_t c = 0; c < ca; ++c) tp.grad_at(pa)(r, c) += g(r, c);
                    if (tp.requires_grad(pb))
                      for (std::size_t c = 0; c < cb; ++c) tp.grad_at(pb)(r, c) += g(r, ca + c);
                  }
                },
                t.requires_grad(pa) || t.requires_grad(pb));
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a) { return neg(a); }

}  // namespace pbrl::ad
