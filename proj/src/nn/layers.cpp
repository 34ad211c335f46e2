#include "psv/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "psv/error.hpp"

namespace psv::nn {

void ParameterStore::claim(const std::string& name) {
  require(std::find(names_.begin(), names_.end(), name) == names_.end(), "duplicate parameter name '" + name + "'");
  names_.push_back(name);
}

Parameter& ParameterStore::add_parameter(const std::string& name, Tensor value) {
  claim(name);
  Parameter p;
  p.name = name;
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  parameters_.push_back(std::move(p));
  return parameters_.back();
}

Tensor& ParameterStore::add_buffer(const std::string& name, Tensor value) {
  claim(name);
  buffers_.emplace_back(name, std::move(value));
  return buffers_.back().second;
}

Parameter* ParameterStore::find_parameter(const std::string& name) {
  for (auto& p : parameters_)
    if (p.name == name) return &p;
  return nullptr;
}

Tensor* ParameterStore::find_buffer(const std::string& name) {
  for (auto& [n, t] : buffers_)
    if (n == name) return &t;
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : parameters_) p.zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters_) total += p.value.size();
  return total;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& init_rng)
    : in_(in), out_(out) {
  require(in >= 1 && out >= 1, "linear layer '" + name + "' needs positive widths");
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> init(-bound, bound);
  Tensor w = Tensor::matrix(in, out);
  for (auto& v : w.values()) v = init(init_rng);
  weight_ = &store.add_parameter(name + ".weight", std::move(w));
  bias_ = &store.add_parameter(name + ".bias", Tensor({out}));
}

Var Linear::operator()(Graph& g, Var x) const {
  return dense(g, x, g.parameter(*weight_), g.parameter(*bias_));
}

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, std::size_t features) {
  gamma_ = &store.add_parameter(name + ".gamma", Tensor({features}, 1.0));
  beta_ = &store.add_parameter(name + ".beta", Tensor({features}, 0.0));
  running_mean_ = &store.add_buffer(name + ".running_mean", Tensor({features}, 0.0));
  running_var_ = &store.add_buffer(name + ".running_var", Tensor({features}, 1.0));
}

Var BatchNorm::operator()(Graph& g, Var x, Mode mode) const {
  return batch_norm(g, x, g.parameter(*gamma_), g.parameter(*beta_), BatchNormState{running_mean_, running_var_}, mode);
}

Mlp::Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& widths, MlpOptions options,
         std::mt19937_64& init_rng)
    : options_(options) {
  require(widths.size() >= 2, "mlp '" + name + "' needs at least an input and an output width");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::string layer = name + "." + std::to_string(i);
    layers_.emplace_back(store, layer, widths[i], widths[i + 1], init_rng);
    const bool activated = i + 2 < widths.size() || options.activate_last;
    if (activated && options.batch_norm) norms_.emplace_back(store, layer + ".bn", widths[i + 1]);
  }
}

Var Mlp::operator()(Graph& g, Var x, const ForwardContext& ctx) const {
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](g, h);
    const bool last = i + 1 == layers_.size();
    if (last && !options_.activate_last) break;
    if (options_.batch_norm) h = norms_[i](g, h, ctx.mode);
    h = relu(g, h);
    if (!last && options_.dropout > 0.0 && ctx.mode == Mode::train) {
      require(ctx.rng != nullptr, "dropout in train mode needs a random generator");
      h = dropout(g, h, options_.dropout, ctx.mode, *ctx.rng);
    }
  }
  return h;
}

}  // namespace psv::nn
