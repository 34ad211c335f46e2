#pragma once

// Run configuration: every model, training and evaluation knob, with a
// plain-text key=value form used by config files and checkpoints.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psv/encoder.hpp"
#include "psv/heads.hpp"
#include "psv/voting.hpp"

namespace psv::pipeline {

struct TrainConfig {
  encoder::EncoderConfig encoder;
  /// head.task selects the task.
  heads::HeadConfig head;
  std::size_t max_votes_train = 10;
  /// Votes used at inference; 0 means all n_sets.
  std::size_t votes_test = 0;
  std::size_t batch_size = 16;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t lr_decay_every = 50;
  double lr_decay_factor = 0.5;
  /// voting trains Gaussian votes; max/mean train pooling baselines.
  voting::Aggregation aggregation = voting::Aggregation::voting;
  std::uint64_t seed = 0;
  std::size_t min_partial_points = 32;
  std::vector<std::string> class_names;

  [[nodiscard]] Task task() const { return head.task; }
  void validate() const;
};

struct ParsedConfig {
  TrainConfig config;
  /// Keys that appeared in the text.
  std::set<std::string> keys;
};

/// Parses key=value lines; '#' starts a comment. Unknown keys, bad values and
/// duplicates throw ValidationError naming `source` and the line.
ParsedConfig parse_config(std::string_view text, const std::string& source);
ParsedConfig read_config(const std::filesystem::path& path);

/// Throws ValidationError naming the first key of `keys` missing from `parsed`.
void require_keys(const ParsedConfig& parsed, std::span<const std::string_view> keys);

/// Keys a run config file must set.
std::span<const std::string_view> required_config_keys();

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const TrainConfig& config);

}  // namespace psv::pipeline
