#pragma once

// Shared-weight local set encoder: every LocalPointSet becomes one diagonal
// Gaussian vote in latent space.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "psv/geometry.hpp"
#include "psv/nn/layers.hpp"

namespace psv::encoder {

inline constexpr double kVarianceFloor = 1e-6;

/// One vote: mean and per-dimension variance of a diagonal Gaussian.
struct VoteDistribution {
  std::vector<double> mean;
  std::vector<double> variance;

  [[nodiscard]] std::size_t dim() const { return mean.size(); }
};

struct EncoderConfig {
  std::size_t latent_dim = 1024;
  std::vector<std::size_t> point_widths{64, 128, 256};
  std::vector<std::size_t> vote_hidden{512};
  double radius = 0.2;
  std::size_t n_sets = 64;
  std::size_t max_points_per_set = 64;
  bool batch_norm = true;
  /// Disabled for the max/mean pooling baselines, whose votes are plain vectors.
  bool variance_head = true;

  void validate() const;
  [[nodiscard]] geometry::PartitionOptions partition() const { return {n_sets, radius, max_points_per_set}; }
};

/// Sets flattened for batched evaluation.
struct SetBatch {
  nn::Tensor points;                 ///< [total points, 3], centroid-relative
  nn::Tensor centroids;              ///< [sets, 3]
  std::vector<std::size_t> offsets;  ///< sets + 1 entries

  [[nodiscard]] std::size_t set_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

SetBatch pack_sets(std::span<const geometry::LocalPointSet> sets);

struct VoteVars {
  nn::Var mean;      ///< [sets, D]
  nn::Var variance;  ///< [sets, D]; invalid when the variance head is off
};

class Encoder {
 public:
  Encoder(nn::ParameterStore& store, EncoderConfig config, std::mt19937_64& init_rng);

  /// Per-point MLP on relative coordinates followed by a max over each set.
  nn::Var features(nn::Graph& g, const SetBatch& batch, const nn::ForwardContext& ctx) const;

  /// Pooled feature + centroid -> vote mean and variance (softplus + floor).
  VoteVars votes(nn::Graph& g, const SetBatch& batch, const nn::ForwardContext& ctx) const;

  // Single-item eval-mode conveniences.
  [[nodiscard]] std::vector<double> encode_set(const geometry::LocalPointSet& set) const;
  [[nodiscard]] VoteDistribution vote_from_set(const geometry::LocalPointSet& set) const;
  [[nodiscard]] std::vector<VoteDistribution> votes_from_sets(std::span<const geometry::LocalPointSet> sets) const;
  /// Partition with the configured n_sets/radius, then one vote per set.
  [[nodiscard]] std::vector<VoteDistribution> encode_cloud(const geometry::PointCloud& cloud, std::uint64_t seed) const;

  [[nodiscard]] const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  nn::Mlp point_mlp_;
  nn::Mlp vote_mlp_;
};

}  // namespace psv::encoder
