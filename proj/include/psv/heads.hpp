#pragma once

// Task decoders: latent vector -> class logits, per-point part logits, or a
// folded point cloud.

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "psv/geometry.hpp"
#include "psv/nn/layers.hpp"
#include "psv/task.hpp"

namespace psv::heads {

/// side x side grid spanning [-0.5, 0.5]^2, truncated to `count` nodes.
struct FoldingGrid {
  std::size_t side = 0;
  std::vector<std::array<double, 2>> coords;

  static FoldingGrid for_points(std::size_t count);
};

struct HeadConfig {
  Task task = Task::classify;
  std::size_t num_classes = 40;
  std::size_t num_parts = 50;
  std::size_t num_categories = 16;
  bool category_onehot = true;
  std::size_t output_points = 2048;
  std::vector<std::size_t> hidden{512, 256};
  std::vector<std::size_t> fold_hidden{512, 512};
  double dropout = 0.5;
  bool batch_norm = true;

  void validate() const;
};

class ClassifierHead {
 public:
  ClassifierHead(nn::ParameterStore& store, std::size_t latent_dim, const HeadConfig& config, std::mt19937_64& rng);
  /// z [B, D] -> logits [B, K]
  nn::Var operator()(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const;

 private:
  nn::Mlp mlp_;
};

/// Inputs for one cloud of a segmentation batch.
struct SegmentationInput {
  std::span<const Vec3> points;
  int category = 0;
};

class SegmentationHead {
 public:
  SegmentationHead(nn::ParameterStore& store, std::size_t latent_dim, const HeadConfig& config, std::mt19937_64& rng);
  /// z [B, D] and B clouds -> logits [sum of point counts, P], rows in input order.
  nn::Var operator()(nn::Graph& g, nn::Var z, std::span<const SegmentationInput> clouds,
                     const nn::ForwardContext& ctx) const;

 private:
  std::size_t categories_;
  bool onehot_;
  nn::Mlp mlp_;
};

class FoldingHead {
 public:
  FoldingHead(nn::ParameterStore& store, std::size_t latent_dim, const HeadConfig& config, std::mt19937_64& rng);
  /// z [B, D] -> points [B * M, 3]; example b owns rows [b*M, (b+1)*M).
  nn::Var operator()(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const;

  [[nodiscard]] std::size_t output_points() const { return grid_.coords.size(); }
  [[nodiscard]] const FoldingGrid& grid() const { return grid_; }

 private:
  FoldingGrid grid_;
  nn::Mlp first_fold_;
  nn::Mlp second_fold_;
};

}  // namespace psv::heads
