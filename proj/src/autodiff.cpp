#include "severitas/autodiff.hpp"

#include "severitas/errors.hpp"

namespace severitas {

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad = Tensor(value.shape(), 0.0);
  return grad.values();
}

Var::Var(Tensor constant) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(constant);
}

Var Tape::leaf(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->tape = this;
  node->id = nodes_.size();
  nodes_.push_back(node);
  return Var(std::move(node));
}

Var Tape::record(Tensor value, std::vector<Var> inputs,
                 std::function<void(detail::Node&)> backward) {
  Tape* tape = nullptr;
  for (const Var& in : inputs) {
    if (!in.tracked()) continue;
    if (tape && tape != in.tape()) throw ArgumentError("op inputs belong to different tapes");
    tape = in.tape();
  }
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  if (!tape) return Var(std::move(node));

  node->tape = tape;
  node->id = tape->nodes_.size();
  node->inputs.reserve(inputs.size());
  for (Var& in : inputs) node->inputs.push_back(std::move(in.node_));
  node->backward = std::move(backward);
  tape->nodes_.push_back(node);
  return Var(std::move(node));
}

void Tape::backward(const Var& loss) {
  if (!loss.valid() || loss.tape() != this) {
    throw ArgumentError("backward: loss is not recorded on this tape");
  }
  if (loss.size() != 1) {
    throw ArgumentError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  for (auto& n : nodes_) n->grad = Tensor();
  loss.node().grad_buffer()[0] = 1.0;
  for (std::size_t i = loss.node_id() + 1; i-- > 0;) {
    detail::Node& n = *nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(n);
  }
}

}  // namespace severitas
