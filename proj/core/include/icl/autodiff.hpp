#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "icl/tensor.hpp"

// Reverse-mode autodiff on a dynamic tape. Every op records its output value
// and a closure that pushes the output gradient into its inputs.
namespace icl::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Var constant(Tensor value) { return push(std::move(value), false, nullptr); }
  Var variable(Tensor value) { return push(std::move(value), true, nullptr); }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Gradient of the last backward() output w.r.t. v; zeros if v never received one.
  Tensor grad(Var v) const;
  // Accumulation slot for id, allocated on first use; null for constants.
  Tensor* grad_slot(std::size_t id);

  // Seeds d(output)/d(output) = 1; output must hold a single value.
  void backward(Var output);

  // Records an op result. `backward` is skipped when no input needs a gradient.
  Var push(Tensor value, bool requires_grad, Backward backward);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a (r x c) plus bias (length c) broadcast over rows.
Var add_row_bias(Var a, Var bias);
Var scale(Var a, double c);
Var square(Var a);
// max(x, 0); subgradient 0 at 0.
Var relu(Var a);
Var softmax_rows(Var a);
// Clamp to [-bound, bound]; gradient passes strictly inside, zero elsewhere.
Var clip(Var a, double bound);
// Each row v is scaled to radius/||v|| when ||v|| > radius.
Var radial_project_rows(Var a, double radius);
Var sum(Var a);
Var mean(Var a);
// Rows [begin, begin + count) of a matrix.
Var rows(Var a, std::size_t begin, std::size_t count);
Var element(Var a, std::size_t r, std::size_t c);

}  // namespace icl::ad
