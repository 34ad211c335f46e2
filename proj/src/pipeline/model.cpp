#include "psv/pipeline/model.hpp"

#include <algorithm>

#include "psv/error.hpp"
#include "psv/seed.hpp"

namespace psv::pipeline {

namespace {

TrainConfig checked(TrainConfig config) {
  config.validate();
  return config;
}

nn::Tensor row_tensor(std::span<const double> z) { return nn::Tensor({1, z.size()}, {z.begin(), z.end()}); }

}  // namespace

// Encoder parameters are created first, then the head, all from one stream.
Model::Model(TrainConfig config)
    : config_(checked(std::move(config))),
      init_rng_(mix_seed(config_.seed, 0x1417)),
      encoder_(store_, config_.encoder, init_rng_) {
  const std::size_t d = config_.encoder.latent_dim;
  switch (config_.task()) {
    case Task::classify: classifier_ = std::make_unique<heads::ClassifierHead>(store_, d, config_.head, init_rng_); break;
    case Task::segment: segmenter_ = std::make_unique<heads::SegmentationHead>(store_, d, config_.head, init_rng_); break;
    case Task::complete: folder_ = std::make_unique<heads::FoldingHead>(store_, d, config_.head, init_rng_); break;
  }
}

void Model::round_to_float() {
  for (auto& p : store_.parameters()) p.value.round_to_float();
  for (auto& [name, buffer] : store_.buffers()) buffer.round_to_float();
}

void Model::require_task(Task t, const char* what) const {
  if (task() != t)
    throw TaskMismatchError(std::string(what) + " needs a " + std::string(to_string(t)) + " model, this one is " +
                            std::string(to_string(task())));
}

nn::Var Model::latent(nn::Graph& g, std::span<const std::vector<geometry::LocalPointSet>> groups,
                      const nn::ForwardContext& ctx) const {
  std::vector<geometry::LocalPointSet> flat;
  std::vector<std::size_t> offsets{0};
  for (const auto& group : groups) {
    require(!group.empty(), "every example needs at least one vote");
    flat.insert(flat.end(), group.begin(), group.end());
    offsets.push_back(flat.size());
  }
  const auto batch = encoder::pack_sets(flat);
  const auto votes = encoder_.votes(g, batch, ctx);
  switch (config_.aggregation) {
    case voting::Aggregation::voting: return voting::optimal_latent(g, votes.mean, votes.variance, offsets);
    case voting::Aggregation::max: return nn::max_pool_segments(g, votes.mean, offsets);
    case voting::Aggregation::mean: return nn::mean_pool_segments(g, votes.mean, offsets);
  }
  throw ValidationError("unknown aggregation");
}

nn::Var Model::classify(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const {
  require_task(Task::classify, "classification");
  return (*classifier_)(g, z, ctx);
}

nn::Var Model::segment(nn::Graph& g, nn::Var z, std::span<const heads::SegmentationInput> clouds,
                       const nn::ForwardContext& ctx) const {
  require_task(Task::segment, "segmentation");
  return (*segmenter_)(g, z, clouds, ctx);
}

nn::Var Model::fold(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const {
  require_task(Task::complete, "completion");
  return (*folder_)(g, z, ctx);
}

std::vector<geometry::LocalPointSet> Model::partition(const geometry::PointCloud& cloud, std::size_t votes,
                                                      std::uint64_t seed) const {
  auto options = config_.encoder.partition();
  if (votes != 0) options.n_sets = votes;
  options.n_sets = std::min(options.n_sets, cloud.size());
  return geometry::build_partition(cloud, options, seed);
}

std::vector<encoder::VoteDistribution> Model::votes(const geometry::PointCloud& cloud, std::size_t votes,
                                                    std::uint64_t seed) const {
  return encoder_.votes_from_sets(partition(cloud, votes, seed));
}

std::vector<double> Model::combine(std::span<const encoder::VoteDistribution> votes,
                                   std::optional<voting::Aggregation> aggregation) const {
  const auto mode = aggregation.value_or(config_.aggregation);
  if (mode == voting::Aggregation::voting) {
    require(config_.encoder.variance_head, "voting aggregation needs a model trained with the variance head");
    return voting::optimal_latent(voting::LatentPosterior({votes.begin(), votes.end()}));
  }
  std::vector<std::vector<double>> means;
  means.reserve(votes.size());
  for (const auto& v : votes) means.push_back(v.mean);
  return voting::aggregate_baseline(means, mode);
}

std::vector<double> Model::latent(const geometry::PointCloud& cloud, std::size_t votes, std::uint64_t seed,
                                  std::optional<voting::Aggregation> aggregation) const {
  return combine(this->votes(cloud, votes, seed), aggregation);
}

std::vector<double> Model::class_logits(std::span<const double> z) const {
  nn::Graph g;
  const auto& out = g.value(classify(g, g.constant(row_tensor(z)), {}));
  return {out.values().begin(), out.values().end()};
}

int Model::predict_class(std::span<const double> z) const {
  const auto logits = class_logits(z);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::vector<int> Model::predict_parts(std::span<const double> z, std::span<const Vec3> points, int category) const {
  nn::Graph g;
  const heads::SegmentationInput input{points, category};
  const auto& logits = g.value(segment(g, g.constant(row_tensor(z)), std::span(&input, 1), {}));
  std::vector<int> parts(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    parts[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return parts;
}

geometry::PointCloud Model::fold(std::span<const double> z) const {
  nn::Graph g;
  const auto& out = g.value(fold(g, g.constant(row_tensor(z)), {}));
  geometry::PointCloud cloud;
  cloud.points.resize(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) cloud.points[r] = {out.at(r, 0), out.at(r, 1), out.at(r, 2)};
  return cloud;
}

}  // namespace psv::pipeline
