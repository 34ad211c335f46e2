#include "psv/nn/graph.hpp"

#include "psv/error.hpp"

namespace psv::nn {

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{nodes_.size() - 1};
}

Var Graph::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var{nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return Var{nodes_.size() - 1};
}

Tensor& Graph::grad(Var v) {
  auto& node = nodes_.at(v.id);
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Graph::backward(Var loss) {
  if (backward_done_) throw ValidationError("backward called twice on the same graph; run a new forward pass");
  require(nodes_.at(loss.id).value.size() == 1, "backward needs a scalar loss");
  backward_done_ = true;
  grad(loss).fill(1.0);

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    // Callbacks only write to earlier nodes, so node.grad stays put.
    if (node.backward) node.backward(*this, node.grad);
  }

  for (auto& node : nodes_) {
    if (!node.param) continue;
    Parameter& p = *node.param;
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
    if (!node.grad.empty()) {
      auto dst = p.grad.values();
      auto src = node.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    p.has_grad = true;
  }
}

}  // namespace psv::nn
