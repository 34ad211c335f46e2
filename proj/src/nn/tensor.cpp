#include "psv/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "psv/error.hpp"

namespace psv::nn {

namespace {
std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(values_.size() == element_count(shape_),
          "tensor value count " + std::to_string(values_.size()) + " does not match shape " + shape_string());
}

std::size_t Tensor::rows() const {
  if (shape_.size() <= 1) return shape_.empty() ? 0 : 1;
  return values_.size() / shape_.back();
}

std::size_t Tensor::cols() const { return shape_.empty() ? 0 : (shape_.size() == 1 ? shape_[0] : shape_.back()); }

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

void Tensor::round_to_float() {
  for (auto& v : values_) v = static_cast<double>(static_cast<float>(v));
}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  grad.fill(0.0);
  has_grad = false;
}

}  // namespace psv::nn
