#include "readnet/num/graph.hpp"

#include <stdexcept>

namespace readnet::num {

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  } else {
    grad.fill(0.0);
  }
  has_grad = false;
}

const Tensor& Var::value() const {
  if (!graph_) throw std::logic_error("use of an unbound Var");
  return graph_->value(id_);
}

Tensor Var::grad() const {
  if (!graph_) throw std::logic_error("use of an unbound Var");
  if (graph_->has_grad(id_)) return graph_->grad(id_);
  return Tensor(value().shape());
}

bool Var::requires_grad() const { return graph_ && graph_->requires_grad(id_); }

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, {}, {}, {}, p.trainable, p.trainable ? &p : nullptr});
  const auto id = nodes_.size() - 1;
  bound_.emplace(&p, id);
  return Var(this, id);
}

Var Graph::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  bool needs = false;
  for (auto pid : parents) needs = needs || nodes_[pid].requires_grad;
  Node node{std::move(value), {}, std::move(parents), {}, needs, nullptr};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Graph::check_owner(const Var& v) const {
  if (v.graph() != this) throw std::invalid_argument("Var belongs to a different graph");
}

void Graph::backward(const Var& loss) {
  check_owner(loss);
  if (backward_done_) throw std::logic_error("backward: graph already differentiated");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_string(loss.value().shape()));
  }
  backward_done_ = true;
  visits_ = 0;
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id()).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    ++visits_;
    if (node.backward) node.backward(*this, i);
  }
  for (auto& node : nodes_) {
    if (!node.bound || node.grad.empty()) continue;
    auto& p = *node.bound;
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
    auto dst = p.grad.data();
    auto src = node.grad.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    p.has_grad = true;
  }
}

}  // namespace readnet::num
