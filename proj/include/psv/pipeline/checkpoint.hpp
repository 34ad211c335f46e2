#pragma once

// Checkpoint container:
//   8-byte magic "PSVCKPT\0", u32 format version,
//   config text, u64 epoch, metrics text, u32 loss count + f64 losses,
//   parameters and batch-norm buffers (named float32 tensors),
//   u64 optimizer steps, first and second moments (named float32 tensors).

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "psv/nn/optimizer.hpp"
#include "psv/pipeline/model.hpp"

namespace psv::pipeline {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint64_t epoch = 0;
  /// Plain-text metric snapshot (may be empty).
  std::string metrics;
  std::vector<double> loss_curve;
};

struct OptimizerState {
  std::uint64_t steps = 0;
  std::vector<nn::Tensor> first_moments;
  std::vector<nn::Tensor> second_moments;
};

struct LoadedCheckpoint {
  std::unique_ptr<Model> model;
  CheckpointInfo info;
  OptimizerState optimizer;
};

/// Rounds the model to float32 in place first, so the in-memory model and a
/// reloaded one evaluate identically.
void save_checkpoint(const std::filesystem::path& path, Model& model, const CheckpointInfo& info,
                     nn::Adam* optimizer = nullptr);

/// Throws ValidationError on a malformed or incompatible file.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace psv::pipeline
