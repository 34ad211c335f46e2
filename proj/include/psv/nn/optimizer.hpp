#pragma once

#include <cstdint>
#include <vector>

#include "psv/nn/layers.hpp"

namespace psv::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer over every parameter of a store.
class Adam {
 public:
  Adam(ParameterStore& store, AdamOptions options = {});

  /// Applies one update. Throws ValidationError if any parameter has no
  /// gradient populated since the last zero_grad().
  void step();

  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  [[nodiscard]] double learning_rate() const { return options_.learning_rate; }
  [[nodiscard]] std::uint64_t step_count() const { return steps_; }

  // Moment arrays, in store order; exposed for checkpointing.
  [[nodiscard]] std::vector<Tensor>& first_moments() { return m_; }
  [[nodiscard]] std::vector<Tensor>& second_moments() { return v_; }
  void set_step_count(std::uint64_t steps) { steps_ = steps; }

 private:
  ParameterStore* store_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t steps_ = 0;
};

/// Learning rate after `epoch` epochs of step decay.
double step_decay(double base_lr, std::size_t epoch, std::size_t every, double factor);

}  // namespace psv::nn
