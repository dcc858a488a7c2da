#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "metaal/nn/param_store.hpp"
#include "metaal/nn/tensor.hpp"

namespace metaal::nn {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Shape& shape() const;
  std::size_t size() const;
  std::span<const double> value() const;
  /// Value of a single-element node.
  double item() const;
};

/// Tape for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is already
/// topologically sorted and backward() walks it in reverse. Parameter leaves
/// are bound to a ParamStore; backward() adds their gradients into it.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  Var constant(std::vector<double> v);
  /// Leaf that receives a gradient; read it back with grad() after backward().
  Var variable(Tensor t);
  /// Leaf bound to store.at(name). Repeated calls return the same node.
  Var parameter(ParamStore& store, const std::string& name);

  /// Appends a computed node. Used by op implementations.
  Var record(Shape shape, std::vector<double> value, bool requires_grad, BackwardFn backward);

  /// Reverse sweep from a single-element root. Parameter gradients are
  /// accumulated into their stores (call ParamStore::zero_grad() first to reset).
  void backward(Var root);

  std::span<const double> value(std::size_t id) const { return nodes_[id].value; }
  std::span<double> grad(std::size_t id) { return nodes_[id].grad; }
  std::span<const double> grad(Var v) const { return nodes_[v.id].grad; }
  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  struct Binding {
    ParamStore* store;
    std::string name;
    std::size_t node;
  };

  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
  std::unordered_map<const ParamStore*, std::unordered_map<std::string, std::size_t>> bound_;
};

// Elementwise and linear-algebra ops. Every op checks shapes and throws
// DimensionError on mismatch.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_constant(Var a, double c);

/// W·x for W of shape [out, in] and x of length in.
Var matvec(Var w, Var x);
Var linear_forward(Var x, Var weight, Var bias);

enum class Activation { linear, tanh, sigmoid, relu };

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var activate(Var a, Activation act);
Var log(Var a);

Var slice(Var a, std::size_t begin, std::size_t length);
Var concat(std::span<const Var> parts);
Var concat(Var a, Var b);
/// Packs single-element nodes into a vector.
Var stack(std::span<const Var> scalars);
Var element(Var a, std::size_t index);

Var sum(Var a);
Var dot(Var a, Var b);

/// exp(t*z_i) / sum_j exp(t*z_j); larger temperature t sharpens.
Var softmax(Var z, double temperature);

/// -log(p[target]) with p[target] clamped into [1e-12, 1 - 1e-12].
Var cross_entropy(Var probs, std::size_t target);

/// a·b / (|a||b|); zero when either norm vanishes (with zero gradient).
Var cosine_similarity(Var a, Var b);
/// -|a - b|; subgradient 0 at a == b.
Var euclidean_similarity(Var a, Var b);

/// Log-probability of drawing `draws` in order from softmax(scores).
/// Without replacement each draw is renormalised over the indices not yet taken.
Var sequential_log_prob(Var scores, std::span<const std::size_t> draws, bool with_replacement = false);

}  // namespace metaal::nn
