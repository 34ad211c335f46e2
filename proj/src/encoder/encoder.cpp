#include "psv/encoder.hpp"

#include <array>

#include "psv/error.hpp"

namespace psv::encoder {

namespace {

std::vector<std::size_t> with_input(std::size_t in, const std::vector<std::size_t>& widths) {
  std::vector<std::size_t> all{in};
  all.insert(all.end(), widths.begin(), widths.end());
  return all;
}

std::vector<std::size_t> vote_widths(const EncoderConfig& c) {
  auto widths = with_input(c.point_widths.back() + 3, c.vote_hidden);
  widths.push_back(c.variance_head ? 2 * c.latent_dim : c.latent_dim);
  return widths;
}

}  // namespace

void EncoderConfig::validate() const {
  require(latent_dim >= 1, "latent_dim must be at least 1");
  require(!point_widths.empty(), "point_widths must not be empty");
  require(radius > 0.0, "radius must be positive");
  require(n_sets >= 1, "n_sets must be at least 1");
  require(max_points_per_set >= 1, "max_points_per_set must be at least 1");
  for (const auto w : point_widths) require(w >= 1, "point_widths entries must be positive");
  for (const auto w : vote_hidden) require(w >= 1, "vote_hidden entries must be positive");
}

SetBatch pack_sets(std::span<const geometry::LocalPointSet> sets) {
  require(!sets.empty(), "no local point sets to encode");
  std::size_t total = 0;
  for (const auto& s : sets) {
    require(!s.relative_points.empty(), "local point set is empty");
    total += s.relative_points.size();
  }
  SetBatch batch;
  batch.points = nn::Tensor::matrix(total, 3);
  batch.centroids = nn::Tensor::matrix(sets.size(), 3);
  batch.offsets.reserve(sets.size() + 1);
  batch.offsets.push_back(0);
  std::size_t row = 0;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (const auto& p : sets[s].relative_points) {
      for (int c = 0; c < 3; ++c) batch.points.at(row, c) = p[c];
      ++row;
    }
    for (int c = 0; c < 3; ++c) batch.centroids.at(s, c) = sets[s].centroid[c];
    batch.offsets.push_back(row);
  }
  return batch;
}

Encoder::Encoder(nn::ParameterStore& store, EncoderConfig config, std::mt19937_64& init_rng)
    : config_((config.validate(), std::move(config))),
      point_mlp_(store, "encoder.point", with_input(3, config_.point_widths),
                 nn::MlpOptions{config_.batch_norm, 0.0, true}, init_rng),
      vote_mlp_(store, "encoder.vote", vote_widths(config_), nn::MlpOptions{config_.batch_norm, 0.0, false}, init_rng) {}

nn::Var Encoder::features(nn::Graph& g, const SetBatch& batch, const nn::ForwardContext& ctx) const {
  const nn::Var points = g.constant(batch.points);
  const nn::Var per_point = point_mlp_(g, points, ctx);
  return nn::max_pool_segments(g, per_point, batch.offsets);
}

VoteVars Encoder::votes(nn::Graph& g, const SetBatch& batch, const nn::ForwardContext& ctx) const {
  const nn::Var pooled = features(g, batch, ctx);
  const std::array<nn::Var, 2> parts{pooled, g.constant(batch.centroids)};
  const nn::Var out = vote_mlp_(g, nn::concat_cols(g, parts), ctx);
  const std::size_t d = config_.latent_dim;
  if (!config_.variance_head) return {out, {}};
  return {nn::slice_cols(g, out, 0, d), nn::softplus(g, nn::slice_cols(g, out, d, 2 * d), kVarianceFloor)};
}

std::vector<double> Encoder::encode_set(const geometry::LocalPointSet& set) const {
  nn::Graph g;
  const SetBatch batch = pack_sets(std::span(&set, 1));
  const auto& v = g.value(features(g, batch, {}));
  return {v.values().begin(), v.values().end()};
}

std::vector<VoteDistribution> Encoder::votes_from_sets(std::span<const geometry::LocalPointSet> sets) const {
  nn::Graph g;
  const SetBatch batch = pack_sets(sets);
  const VoteVars vars = votes(g, batch, {});
  const std::size_t d = config_.latent_dim;
  std::vector<VoteDistribution> out(sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto mean_row = g.value(vars.mean).row(s);
    out[s].mean.assign(mean_row.begin(), mean_row.end());
    if (vars.variance.valid()) {
      const auto var_row = g.value(vars.variance).row(s);
      out[s].variance.assign(var_row.begin(), var_row.end());
    } else {
      out[s].variance.assign(d, 1.0);
    }
  }
  return out;
}

VoteDistribution Encoder::vote_from_set(const geometry::LocalPointSet& set) const {
  return votes_from_sets(std::span(&set, 1)).front();
}

std::vector<VoteDistribution> Encoder::encode_cloud(const geometry::PointCloud& cloud, std::uint64_t seed) const {
  const auto sets = geometry::build_partition(cloud, config_.partition(), seed);
  return votes_from_sets(sets);
}

}  // namespace psv::encoder
