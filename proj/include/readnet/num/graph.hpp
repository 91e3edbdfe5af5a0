#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "readnet/num/tensor.hpp"

namespace readnet::num {

/// A trainable (or frozen) named tensor plus its gradient and Adam state.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool has_grad = false;

  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t steps = 0;

  void zero_grad();
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient after Graph::backward; a zero tensor when the node received none.
  Tensor grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Graph* graph() const noexcept { return graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is a topological order
/// by construction and backward is a single reverse sweep.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  /// Trainable parameters become leaves whose gradient is added to p.grad by
  /// backward(); frozen ones are recorded as constants. Binding the same
  /// parameter twice returns the same node.
  Var parameter(Parameter& p);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape once. Loss must be 1x1.
  void backward(const Var& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t last_backward_visits() const noexcept { return visits_; }

  // Op-author interface.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  /// Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad(std::size_t id);
  void check_owner(const Var& v) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
    Parameter* bound = nullptr;
  };

  // A deque keeps value() references valid while later nodes are recorded.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  std::size_t visits_ = 0;
  bool backward_done_ = false;
};

}  // namespace readnet::num
