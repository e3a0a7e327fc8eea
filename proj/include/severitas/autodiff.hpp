#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "severitas/tensor.hpp"

namespace severitas {

class Tape;

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  Tape* tape = nullptr;  // null for constants
  std::size_t id = 0;

  /// Gradient buffer, zero-initialised on first use.
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Handle to a value that may be recorded on a gradient tape.
///
/// Untracked vars are plain constants. A var is tracked when it is a tape
/// leaf or the output of an op that consumed a tracked var. The tape must
/// outlive every tracked var created on it.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor constant);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  /// Gradient after Tape::backward; empty if nothing reached this var.
  const Tensor& grad() const { return node_->grad; }
  bool tracked() const { return node_ && node_->tape != nullptr; }
  bool valid() const { return static_cast<bool>(node_); }
  Tape* tape() const { return node_ ? node_->tape : nullptr; }
  std::size_t node_id() const { return node_->id; }

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  friend class Tape;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of primitive applications. Single-writer.
///
/// Nodes are appended as they are created, so the record is topologically
/// ordered by construction and backward is a single reverse sweep.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Tracked leaf (parameter or input we want gradients for).
  Var leaf(Tensor value);

  /// Records an op output. When no input is tracked the result is a
  /// constant and `backward` is discarded.
  static Var record(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backward);

  /// Reverse accumulation from a scalar (single-element) tracked var.
  void backward(const Var& loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

}  // namespace severitas
