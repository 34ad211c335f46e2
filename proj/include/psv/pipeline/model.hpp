#pragma once

// Encoder + task head behind one object, with the batched differentiable
// forward used in training and eval-mode single-cloud inference.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "psv/encoder.hpp"
#include "psv/heads.hpp"
#include "psv/pipeline/config.hpp"
#include "psv/voting.hpp"

namespace psv::pipeline {

class Model {
 public:
  /// Builds and initializes every parameter from config.seed.
  explicit Model(TrainConfig config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  [[nodiscard]] const TrainConfig& config() const { return config_; }
  [[nodiscard]] Task task() const { return config_.task(); }
  [[nodiscard]] nn::ParameterStore& store() { return store_; }
  [[nodiscard]] const nn::ParameterStore& store() const { return store_; }
  [[nodiscard]] const encoder::Encoder& encoder() const { return encoder_; }

  /// Rounds every parameter and buffer to float32, the checkpoint precision.
  void round_to_float();

  // -- differentiable path ---------------------------------------------------

  /// One latent row per group of sets. `groups` holds, per example, the sets
  /// that vote for it.
  nn::Var latent(nn::Graph& g, std::span<const std::vector<geometry::LocalPointSet>> groups,
                 const nn::ForwardContext& ctx) const;

  nn::Var classify(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const;
  nn::Var segment(nn::Graph& g, nn::Var z, std::span<const heads::SegmentationInput> clouds,
                  const nn::ForwardContext& ctx) const;
  nn::Var fold(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const;

  // -- eval-mode inference ---------------------------------------------------

  /// Sets used at inference: the first `votes` FPS centroids (0 = n_sets),
  /// capped at the cloud size.
  [[nodiscard]] std::vector<geometry::LocalPointSet> partition(const geometry::PointCloud& cloud, std::size_t votes,
                                                               std::uint64_t seed) const;

  [[nodiscard]] std::vector<encoder::VoteDistribution> votes(const geometry::PointCloud& cloud, std::size_t votes,
                                                             std::uint64_t seed) const;

  /// Combines votes with `aggregation` (default: the trained one). Voting
  /// needs a model trained with the variance head.
  [[nodiscard]] std::vector<double> combine(std::span<const encoder::VoteDistribution> votes,
                                            std::optional<voting::Aggregation> aggregation = {}) const;

  [[nodiscard]] std::vector<double> latent(const geometry::PointCloud& cloud, std::size_t votes, std::uint64_t seed,
                                           std::optional<voting::Aggregation> aggregation = {}) const;

  [[nodiscard]] std::vector<double> class_logits(std::span<const double> z) const;
  [[nodiscard]] int predict_class(std::span<const double> z) const;
  [[nodiscard]] std::vector<int> predict_parts(std::span<const double> z, std::span<const Vec3> points,
                                               int category) const;
  [[nodiscard]] geometry::PointCloud fold(std::span<const double> z) const;

 private:
  void require_task(Task t, const char* what) const;

  TrainConfig config_;
  nn::ParameterStore store_;
  std::mt19937_64 init_rng_;
  encoder::Encoder encoder_;
  std::unique_ptr<heads::ClassifierHead> classifier_;
  std::unique_ptr<heads::SegmentationHead> segmenter_;
  std::unique_ptr<heads::FoldingHead> folder_;
};

}  // namespace psv::pipeline
