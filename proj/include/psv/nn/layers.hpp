#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "psv/nn/graph.hpp"
#include "psv/nn/ops.hpp"

namespace psv::nn {

/// Owns every parameter and non-trainable buffer of a model. Addresses stay
/// stable for the store's lifetime; names are unique.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add_parameter(const std::string& name, Tensor value);
  Tensor& add_buffer(const std::string& name, Tensor value);

  [[nodiscard]] std::deque<Parameter>& parameters() { return parameters_; }
  [[nodiscard]] const std::deque<Parameter>& parameters() const { return parameters_; }
  [[nodiscard]] std::deque<std::pair<std::string, Tensor>>& buffers() { return buffers_; }
  [[nodiscard]] const std::deque<std::pair<std::string, Tensor>>& buffers() const { return buffers_; }

  Parameter* find_parameter(const std::string& name);
  Tensor* find_buffer(const std::string& name);

  void zero_grad();
  [[nodiscard]] std::size_t scalar_count() const;

 private:
  void claim(const std::string& name);

  std::deque<Parameter> parameters_;
  std::deque<std::pair<std::string, Tensor>> buffers_;
  std::vector<std::string> names_;
};

/// Mode plus the randomness source used by dropout during training.
struct ForwardContext {
  Mode mode = Mode::eval;
  std::mt19937_64* rng = nullptr;
};

class Linear {
 public:
  /// Weights uniform in +-sqrt(6 / (in + out)), bias zero.
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& init_rng);

  Var operator()(Graph& g, Var x) const;
  [[nodiscard]] std::size_t in() const { return in_; }
  [[nodiscard]] std::size_t out() const { return out_; }

 private:
  Parameter* weight_;
  Parameter* bias_;
  std::size_t in_;
  std::size_t out_;
};

class BatchNorm {
 public:
  BatchNorm(ParameterStore& store, const std::string& name, std::size_t features);
  Var operator()(Graph& g, Var x, Mode mode) const;

 private:
  Parameter* gamma_;
  Parameter* beta_;
  Tensor* running_mean_;
  Tensor* running_var_;
};

struct MlpOptions {
  bool batch_norm = true;
  /// Dropout after every hidden activation (train mode only).
  double dropout = 0.0;
  /// Apply batch norm + ReLU after the last layer as well.
  bool activate_last = false;
};

/// Stack of Linear layers: hidden layers are Linear -> [BN] -> ReLU -> [dropout].
class Mlp {
 public:
  Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& widths, MlpOptions options,
      std::mt19937_64& init_rng);

  Var operator()(Graph& g, Var x, const ForwardContext& ctx) const;
  [[nodiscard]] std::size_t in() const { return layers_.front().in(); }
  [[nodiscard]] std::size_t out() const { return layers_.back().out(); }

 private:
  std::vector<Linear> layers_;
  std::vector<BatchNorm> norms_;
  MlpOptions options_;
};

}  // namespace psv::nn
