#include "psv/nn/optimizer.hpp"

#include <cmath>

#include "psv/error.hpp"

namespace psv::nn {

Adam::Adam(ParameterStore& store, AdamOptions options) : store_(&store), options_(options) {
  for (const auto& p : store.parameters()) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void Adam::step() {
  auto& params = store_->parameters();
  require(params.size() == m_.size(), "optimizer state does not match the parameter store");
  for (const auto& p : params)
    require(p.has_grad, "parameter '" + p.name + "' has no gradient; run backward before optimizer step");

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].value.values();
    const auto grad = params[i].grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * grad[k];
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      value[k] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

double step_decay(double base_lr, std::size_t epoch, std::size_t every, double factor) {
  if (every == 0) return base_lr;
  return base_lr * std::pow(factor, static_cast<double>(epoch / every));
}

}  // namespace psv::nn
