#include "streamtag/autodiff.hpp"

#include <cmath>

namespace streamtag::num {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor normal_table(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t({rows, cols});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant_ref(const Tensor& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.ref = &p.value;
  n.requires_grad = grad_enabled_ && p.trainable;
  n.param = &p;
  nodes_.push_back(std::move(n));
  const std::size_t id = nodes_.size() - 1;
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.graph_ != this) throw std::logic_error("op input belongs to another graph");
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  n.requires_grad = n.requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tensor& Graph::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::backward(Var root) {
  if (root.graph_ != this) throw std::logic_error("backward root belongs to another graph");
  if (value(root.id_).size() != 1) {
    throw ShapeError("backward root must be a single element, got " +
                     shape_string(value(root.id_).shape()));
  }
  if (!nodes_[root.id_].requires_grad) return;
  grad(root.id_).fill(1.0);
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.has_grad) continue;
    if (n.backward) {
      n.backward(*this, id);
    } else if (n.param != nullptr) {
      n.param->grad.add_inplace(n.grad);
    }
  }
}

}  // namespace streamtag::num
