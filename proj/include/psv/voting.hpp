#pragma once

// Combining Gaussian votes into one latent vector.
//
// Votes are independent diagonal Gaussians, so their product is Gaussian too
// and its mode is available in closed form: per dimension, the
// precision-weighted mean of the vote means.

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "psv/encoder.hpp"
#include "psv/nn/graph.hpp"

namespace psv::voting {

using encoder::VoteDistribution;

/// The product of a non-empty list of votes sharing one latent dimension.
class LatentPosterior {
 public:
  explicit LatentPosterior(std::vector<VoteDistribution> votes);

  [[nodiscard]] const std::vector<VoteDistribution>& votes() const { return votes_; }
  [[nodiscard]] std::size_t dim() const { return votes_.front().dim(); }
  [[nodiscard]] std::size_t size() const { return votes_.size(); }

 private:
  std::vector<VoteDistribution> votes_;
};

/// Mode of the product density: sum(mu/var) / sum(1/var), per dimension.
std::vector<double> optimal_latent(const LatentPosterior& posterior);

/// log of prod_i N(z; mu_i, diag(var_i)).
double log_product_density(const LatentPosterior& posterior, std::span<const double> z);

/// Training-time vote dropping: k ~ Uniform{1..min(max_votes, vote_count)},
/// then k distinct indices chosen uniformly. Returned in ascending order.
std::vector<std::size_t> select_training_votes(std::size_t vote_count, std::size_t max_votes, std::mt19937_64& rng);

std::vector<VoteDistribution> select_training_votes(std::span<const VoteDistribution> votes, std::size_t max_votes,
                                                    std::mt19937_64& rng);

enum class Aggregation { voting, max, mean };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

/// Element-wise max or mean over deterministic per-set feature vectors.
std::vector<double> aggregate_baseline(std::span<const std::vector<double>> features, Aggregation mode);

/// z(t) = (1-t) * optimum(all votes) + t * optimum({vote_index}), t evenly spaced on [0,1].
std::vector<std::vector<double>> interpolated_latents(const LatentPosterior& posterior, std::size_t vote_index,
                                                      std::size_t steps);

/// Draw from the product Gaussian: mean = optimal_latent, variance = 1 / sum(1/var).
std::vector<double> sample_product(const LatentPosterior& posterior, std::mt19937_64& rng);

/// Differentiable optimal_latent over ragged groups of vote rows.
/// mean/variance are [votes, D]; group g spans rows [offsets[g], offsets[g+1]).
nn::Var optimal_latent(nn::Graph& g, nn::Var mean, nn::Var variance, std::span<const std::size_t> offsets);

}  // namespace psv::voting
