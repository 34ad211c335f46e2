#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "psv/data.hpp"
#include "psv/nn/optimizer.hpp"
#include "psv/pipeline/model.hpp"

namespace psv::pipeline {

struct TrainOptions {
  /// Where the diagnostic dump goes if the loss turns non-finite; empty for none.
  std::filesystem::path dump_path;
  /// Called after every epoch with the epoch's mean example loss.
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::unique_ptr<nn::Adam> optimizer;
  /// Mean example loss per epoch.
  std::vector<double> loss_curve;
};

/// Checks that the dataset fits the configured task and head sizes. Throws
/// TaskMismatchError or ValidationError.
void check_dataset(const TrainConfig& config, const data::Dataset& dataset);

/// Minibatch training with random vote dropping. Each step partitions every
/// example, keeps a random subset of its sets (at most max_votes_train),
/// combines their votes into one latent per example, decodes it and takes an
/// optimizer step on the task loss. The returned model is rounded to float32
/// so it evaluates exactly like its checkpoint. A non-finite loss throws
/// NumericalError after writing options.dump_path.
TrainResult train(const TrainConfig& config, const data::Dataset& dataset, const TrainOptions& options = {});

/// Loss of one batch in the given mode, as used by train(). `groups` holds
/// the voting sets of each example. Exposed for gradient checks.
nn::Var batch_loss(nn::Graph& g, const Model& model, std::span<const data::Sample* const> batch,
                   std::span<const std::vector<geometry::LocalPointSet>> groups, const nn::ForwardContext& ctx);

}  // namespace psv::pipeline
