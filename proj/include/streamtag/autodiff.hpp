#ifndef STREAMTAG_AUTODIFF_HPP_
#define STREAMTAG_AUTODIFF_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "streamtag/tensor.hpp"

namespace streamtag::num {

struct Parameter {
  std::string name;
  Tensor value;
  // Accumulator written by Graph::backward, also through const references.
  mutable Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}

  void zero_grad() const { grad.fill(0.0); }
};

// Initializers. Weight matrices use Glorot-uniform over (fan_in, fan_out).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);
Tensor normal_table(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid for the graph's lifetime.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in topological order, so backward is a
/// single reverse sweep. Frozen parameters, and every parameter when gradients
/// are disabled, enter the tape as constants referencing the parameter value;
/// such parameters must outlive the graph.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value);
  // Borrowed constant; `value` must outlive the graph.
  Var constant_ref(const Tensor& value);
  Var parameter(const Parameter& p);
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.ref ? *n.ref : n.value;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }

  // Gradient buffer of a node, allocated as zeros on first access.
  Tensor& grad(std::size_t id);

  /// Seeds d(root)=1 (root must hold one element), sweeps the tape backwards
  /// and adds leaf gradients into their Parameter::grad.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    const Parameter* param = nullptr;
  };
  bool grad_enabled_ = true;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

}  // namespace streamtag::num

#endif  // STREAMTAG_AUTODIFF_HPP_
