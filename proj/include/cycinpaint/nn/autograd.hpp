#pragma once

// Minimal tape-free reverse-mode autodiff. Each Var owns a Node; ops record
// their inputs and a backward closure only when gradients are enabled and at
// least one input requires them. backward() topologically sorts the graph
// reachable from a scalar root.

#include <functional>
#include <memory>
#include <vector>

#include "cycinpaint/core/tensor.hpp"

namespace cycinpaint::nn {

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Zero-initialized gradient buffer matching value's shape.
  Tensor& grad_buffer();
  bool has_grad() const { return !grad.empty(); }
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  /// Mutable access, for optimizers and for loading weights.
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool defined() const { return static_cast<bool>(node_); }

  /// Backpropagates from this Var, which must hold exactly one element.
  void backward();
  void zero_grad();

  /// Scalar value of a one-element Var.
  float item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Builds an op result. `backward` is kept only when some input needs grad.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

}  // namespace cycinpaint::nn
