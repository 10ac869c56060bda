#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "booster/tensor.hpp"

namespace booster::ad {

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] const Shape& shape() const { return value().shape(); }
};

/// View handed to a backward rule: the upstream gradient, the forward values,
/// and writable gradient slots for inputs that participate in differentiation.
class BackwardContext {
 public:
  BackwardContext(Graph& graph, std::size_t node) : graph_(graph), node_(node) {}

  [[nodiscard]] const Tensor& out_grad() const;
  [[nodiscard]] const Tensor& output() const;
  [[nodiscard]] const Tensor& input(std::size_t i) const;
  /// Accumulation target for input i, or nullptr when that input needs no gradient.
  [[nodiscard]] Tensor* input_grad(std::size_t i) const;

 private:
  Graph& graph_;
  std::size_t node_;
};

using BackwardRule = std::function<void(const BackwardContext&)>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so creation order is
/// a topological order and backward walks it in reverse, visiting each node once.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf owning its value.
  Var leaf(Tensor value, bool requires_grad = false);
  /// Leaf referencing caller-owned storage, which must outlive the graph.
  Var borrow(const Tensor& value, bool requires_grad = false);

  /// Append an operation node. Throws NumericalError if `value` is not finite.
  /// `branch` identifies which piece of a piecewise op was taken (ReLU signs, pool
  /// argmax, ...); 0 for smooth ops.
  Var record(std::string op, Tensor value, std::vector<Var> inputs, BackwardRule backward, std::uint64_t branch = 0);

  [[nodiscard]] const Tensor& value(Var v) const;
  [[nodiscard]] bool requires_grad(Var v) const;
  [[nodiscard]] bool has_grad(Var v) const;
  /// Gradient accumulated by the last backward(); zeros if the node was unreached.
  [[nodiscard]] const Tensor& grad(Var v) const;
  [[nodiscard]] const std::string& op(Var v) const;

  /// Seed d(output)/d(output) = 1 and propagate. Output must be a single element.
  void backward(Var output);
  void zero_grad();

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  /// Combined branch ids of all recorded ops. Two evaluations of the same expression
  /// with equal signatures took the same linear piece of every non-smooth op.
  [[nodiscard]] std::uint64_t branch_signature() const;

 private:
  friend class BackwardContext;

  struct Node {
    std::string op;
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<std::size_t> inputs;
    BackwardRule backward;
    bool requires_grad = false;
    bool grad_ready = false;
    Tensor grad;
    std::uint64_t branch = 0;

    [[nodiscard]] const Tensor& value() const { return external ? *external : owned; }
  };

  Node& node(Var v);
  [[nodiscard]] const Node& node(Var v) const;
  Tensor* grad_slot(std::size_t id);

  std::vector<Node> nodes_;
};

struct GradResult {
  float loss = 0.0f;
  std::vector<Tensor> grads;
};

/// Run backward from a scalar `output` and collect gradients for each member of `wrt`.
/// Throws ShapeError for non-scalar output and ConfigError if a member of `wrt`
/// does not require grad.
GradResult eval_with_grad(Graph& graph, Var output, std::span<const Var> wrt);

}  // namespace booster::ad
