#pragma once

// Tape-free reverse-mode differentiation. Every op result keeps shared
// pointers to its inputs and a closure that pushes its gradient back into
// them; `backward` walks the resulting DAG in reverse topological order.

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "relfb/numerics/tensor.hpp"

namespace relfb {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something writes to it
  bool track_grad = false;
  bool released = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient buffer shaped like `value`, allocated on first use.
  Tensor& grad_buffer();
};

/// Handle to a node in the differentiation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var leaf(Tensor value, bool track_grad = true);

  bool defined() const noexcept { return node_ != nullptr; }
  explicit operator bool() const noexcept { return defined(); }

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool track_grad() const { return node_ && node_->track_grad; }
  /// Accumulated gradient; empty tensor if nothing reached this node.
  const Tensor& grad() const { return node_->grad; }

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Seeds d(loss)/d(loss) = 1 and accumulates (+=) into every reachable
/// gradient-tracking leaf. Interior nodes are released afterwards.
/// Throws DimensionError for a non-scalar loss.
void backward(const Var& loss);

/// While alive, ops on this thread record no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled() noexcept;

/// A named, learnable leaf. `group` ties parameters to the model component
/// they belong to (used for freezing, transfer and per-module grad checks).
class Parameter {
 public:
  Parameter(std::string name, std::string group, Tensor init);
  Parameter(const Parameter&) = delete;
  Parameter& operator=(const Parameter&) = delete;
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const noexcept { return name_; }
  const std::string& group() const noexcept { return group_; }

  const Var& var() const noexcept { return var_; }
  Tensor& value() { return var_.node()->value; }
  const Tensor& value() const { return var_.value(); }
  Tensor& grad() { return var_.node()->grad_buffer(); }
  const Tensor& grad() const { return var_.grad(); }
  void zero_grad();

  bool trainable() const noexcept { return var_.node()->track_grad; }
  void set_trainable(bool trainable) { var_.node()->track_grad = trainable; }

 private:
  std::string name_;
  std::string group_;
  Var var_;
};

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace relfb
