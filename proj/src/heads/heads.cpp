#include "psv/heads.hpp"

#include <cmath>
#include <string>

#include "psv/error.hpp"

namespace psv::heads {

namespace {

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

FoldingGrid FoldingGrid::for_points(std::size_t count) {
  require(count >= 1, "folding grid needs at least one point");
  FoldingGrid grid;
  grid.side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  while (grid.side * grid.side < count) ++grid.side;
  const double step = grid.side > 1 ? 1.0 / static_cast<double>(grid.side - 1) : 0.0;
  for (std::size_t i = 0; i < grid.side && grid.coords.size() < count; ++i)
    for (std::size_t j = 0; j < grid.side && grid.coords.size() < count; ++j)
      grid.coords.push_back({-0.5 + step * static_cast<double>(i), -0.5 + step * static_cast<double>(j)});
  return grid;
}

void HeadConfig::validate() const {
  switch (task) {
    case Task::classify:
      require(num_classes >= 1, "num_classes must be positive");
      require(!hidden.empty(), "classifier hidden widths must not be empty");
      break;
    case Task::segment:
      require(num_parts >= 1, "num_parts must be positive");
      require(num_categories >= 1, "num_categories must be positive");
      require(!hidden.empty(), "segmentation hidden widths must not be empty");
      break;
    case Task::complete:
      require(output_points >= 1, "output_points must be positive");
      require(!fold_hidden.empty(), "fold hidden widths must not be empty");
      break;
  }
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
}

ClassifierHead::ClassifierHead(nn::ParameterStore& store, std::size_t latent_dim, const HeadConfig& config,
                               std::mt19937_64& rng)
    : mlp_(store, "head.classify", widths(latent_dim, config.hidden, config.num_classes),
           nn::MlpOptions{config.batch_norm, config.dropout, false}, rng) {}

nn::Var ClassifierHead::operator()(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const {
  return mlp_(g, z, ctx);
}

SegmentationHead::SegmentationHead(nn::ParameterStore& store, std::size_t latent_dim, const HeadConfig& config,
                                   std::mt19937_64& rng)
    : categories_(config.num_categories),
      onehot_(config.category_onehot),
      mlp_(store, "head.segment",
           widths(latent_dim + 3 + (config.category_onehot ? config.num_categories : 0), config.hidden,
                  config.num_parts),
           nn::MlpOptions{config.batch_norm, 0.0, false}, rng) {}

nn::Var SegmentationHead::operator()(nn::Graph& g, nn::Var z, std::span<const SegmentationInput> clouds,
                                     const nn::ForwardContext& ctx) const {
  require(g.value(z).rows() == clouds.size(), "segmentation needs one latent per cloud");
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  for (const auto& c : clouds) {
    require(!c.points.empty(), "segmentation input cloud is empty");
    require(c.category >= 0 && static_cast<std::size_t>(c.category) < categories_, "category out of range");
    counts.push_back(c.points.size());
    total += c.points.size();
  }
  const std::size_t extra = onehot_ ? categories_ : 0;
  nn::Tensor per_point = nn::Tensor::matrix(total, 3 + extra);
  std::size_t row = 0;
  for (const auto& c : clouds)
    for (const auto& p : c.points) {
      for (int k = 0; k < 3; ++k) per_point.at(row, k) = p[k];
      if (onehot_) per_point.at(row, 3 + static_cast<std::size_t>(c.category)) = 1.0;
      ++row;
    }
  const std::array<nn::Var, 2> parts{nn::repeat_rows(g, z, counts), g.constant(std::move(per_point))};
  return mlp_(g, nn::concat_cols(g, parts), ctx);
}

FoldingHead::FoldingHead(nn::ParameterStore& store, std::size_t latent_dim, const HeadConfig& config,
                         std::mt19937_64& rng)
    : grid_(FoldingGrid::for_points(config.output_points)),
      first_fold_(store, "head.fold1", widths(latent_dim + 2, config.fold_hidden, 3), nn::MlpOptions{false, 0.0, false},
                  rng),
      second_fold_(store, "head.fold2", widths(latent_dim + 3, config.fold_hidden, 3),
                   nn::MlpOptions{false, 0.0, false}, rng) {}

nn::Var FoldingHead::operator()(nn::Graph& g, nn::Var z, const nn::ForwardContext& ctx) const {
  const std::size_t batch = g.value(z).rows();
  const std::size_t m = grid_.coords.size();
  nn::Tensor grid = nn::Tensor::matrix(batch * m, 2);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < m; ++i) {
      grid.at(b * m + i, 0) = grid_.coords[i][0];
      grid.at(b * m + i, 1) = grid_.coords[i][1];
    }
  const std::vector<std::size_t> counts(batch, m);
  const nn::Var z_rows = nn::repeat_rows(g, z, counts);
  const std::array<nn::Var, 2> first_in{z_rows, g.constant(std::move(grid))};
  const nn::Var folded = first_fold_(g, nn::concat_cols(g, first_in), ctx);
  const std::array<nn::Var, 2> second_in{z_rows, folded};
  return second_fold_(g, nn::concat_cols(g, second_in), ctx);
}

}  // namespace psv::heads
