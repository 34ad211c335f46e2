#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace psv::nn {

/// Dense row-major array of doubles. Rank-2 access treats every leading
/// dimension as rows and the last one as columns.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }
  [[nodiscard]] std::size_t rows() const;
  [[nodiscard]] std::size_t cols() const;

  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::vector<double>& storage() { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

  void fill(double value);
  [[nodiscard]] bool all_finite() const;
  [[nodiscard]] std::string shape_string() const;

  /// Rounds every value to the nearest 32-bit float.
  void round_to_float();

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

/// A named trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool has_grad = false;

  void zero_grad();
};

}  // namespace psv::nn
