#include "booster/autodiff/graph.hpp"

#include <algorithm>
#include <cmath>

#include "booster/errors.hpp"

namespace booster::ad {

const Tensor& Var::value() const { return graph->value(*this); }

const Tensor& BackwardContext::out_grad() const { return graph_.nodes_[node_].grad; }

const Tensor& BackwardContext::output() const { return graph_.nodes_[node_].value(); }

const Tensor& BackwardContext::input(std::size_t i) const {
  return graph_.nodes_[graph_.nodes_[node_].inputs.at(i)].value();
}

Tensor* BackwardContext::input_grad(std::size_t i) const {
  return graph_.grad_slot(graph_.nodes_[node_].inputs.at(i));
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = "leaf";
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::borrow(const Tensor& value, bool requires_grad) {
  Node n;
  n.op = "leaf";
  n.external = &value;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(std::string op, Tensor value, std::vector<Var> inputs, BackwardRule backward, std::uint64_t branch) {
  if (!value.all_finite()) {
    throw NumericalError("non-finite forward value at node " + std::to_string(nodes_.size()) + " (" + op + ")");
  }
  Node n;
  n.op = std::move(op);
  n.owned = std::move(value);
  n.backward = std::move(backward);
  n.branch = branch;
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (in.graph != this) throw ShapeError("operand belongs to a different graph");
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Graph::Node& Graph::node(Var v) {
  if (v.graph != this || v.id >= nodes_.size()) throw ShapeError("variable does not belong to this graph");
  return nodes_[v.id];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) throw ShapeError("variable does not belong to this graph");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value(); }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

bool Graph::has_grad(Var v) const { return node(v).grad_ready; }

const Tensor& Graph::grad(Var v) const {
  const Node& n = node(v);
  if (!n.grad_ready) throw ShapeError("no gradient recorded for node " + std::to_string(v.id));
  return n.grad;
}

const std::string& Graph::op(Var v) const { return node(v).op; }

Tensor* Graph::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.grad_ready) {
    n.grad = Tensor(n.value().shape(), 0.0f);
    n.grad_ready = true;
  }
  return &n.grad;
}

void Graph::zero_grad() {
  for (Node& n : nodes_) {
    n.grad = Tensor();
    n.grad_ready = false;
  }
}

void Graph::backward(Var output) {
  Node& out = node(output);
  if (out.value().size() != 1) {
    throw ShapeError("backward requires a scalar output, got shape " + out.value().shape().str());
  }
  zero_grad();
  if (!out.requires_grad) return;
  grad_slot(output.id)->fill(1.0f);

  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.grad_ready || !n.backward) continue;
    n.backward(BackwardContext(*this, i));
    for (std::size_t in : nodes_[i].inputs) {
      const Node& src = nodes_[in];
      if (src.grad_ready && !src.grad.all_finite()) {
        throw NumericalError("non-finite gradient produced by node " + std::to_string(i) + " (" + nodes_[i].op +
                             ")");
      }
    }
  }
}

std::uint64_t Graph::branch_signature() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Node& n : nodes_) h = (h ^ n.branch) * 1099511628211ULL;
  return h;
}

GradResult eval_with_grad(Graph& graph, Var output, std::span<const Var> wrt) {
  for (const Var& v : wrt) {
    if (!graph.requires_grad(v)) {
      throw ConfigError("eval_with_grad: node " + std::to_string(v.id) + " does not require grad");
    }
  }
  graph.backward(output);
  GradResult r;
  r.loss = graph.value(output).item();
  r.grads.reserve(wrt.size());
  for (const Var& v : wrt) {
    r.grads.push_back(graph.has_grad(v) ? graph.grad(v) : Tensor(graph.value(v).shape(), 0.0f));
  }
  return r;
}

}  // namespace booster::ad
