#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "psv/nn/tensor.hpp"

namespace psv::nn {

enum class Mode { train, eval };

/// Handle to a value recorded on a Graph.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  [[nodiscard]] bool valid() const { return id != std::numeric_limits<std::size_t>::max(); }
};

class Graph;
using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

/// Reverse-mode tape. Values are recorded in creation order, which is a
/// topological order, so backward() is a single reverse sweep.
/// One graph per forward pass; backward() may run once.
class Graph {
 public:
  Var constant(Tensor value);
  Var parameter(Parameter& p);

  /// Records an op result. `backward` receives the gradient of this node and
  /// must accumulate into the gradients of its inputs.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);

  [[nodiscard]] const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient buffer of `v`, zero-initialized on first access.
  Tensor& grad(Var v);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Every parameter on the tape
  /// ends up with has_grad set, even if no gradient reached it.
  void backward(Var loss);

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace psv::nn
