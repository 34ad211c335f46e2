#include "psv/voting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "psv/error.hpp"

namespace psv::voting {

LatentPosterior::LatentPosterior(std::vector<VoteDistribution> votes) : votes_(std::move(votes)) {
  require(!votes_.empty(), "a latent posterior needs at least one vote");
  const std::size_t d = votes_.front().dim();
  require(d >= 1, "votes must have a positive latent dimension");
  for (const auto& v : votes_) {
    require(v.mean.size() == d && v.variance.size() == d, "votes disagree on latent dimension");
    for (std::size_t k = 0; k < d; ++k)
      require(std::isfinite(v.mean[k]) && std::isfinite(v.variance[k]) && v.variance[k] > 0.0,
              "vote has a non-finite mean or non-positive variance");
  }
}

std::vector<double> optimal_latent(const LatentPosterior& posterior) {
  // A lone vote is its own mode; skip the divisions so it comes back exactly.
  if (posterior.size() == 1) return posterior.votes().front().mean;
  const std::size_t d = posterior.dim();
  std::vector<double> weighted(d, 0.0), precision(d, 0.0);
  for (const auto& v : posterior.votes())
    for (std::size_t k = 0; k < d; ++k) {
      weighted[k] += v.mean[k] / v.variance[k];
      precision[k] += 1.0 / v.variance[k];
    }
  for (std::size_t k = 0; k < d; ++k) weighted[k] /= precision[k];
  return weighted;
}

double log_product_density(const LatentPosterior& posterior, std::span<const double> z) {
  require(z.size() == posterior.dim(), "latent dimension mismatch");
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (const auto& v : posterior.votes())
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double diff = z[k] - v.mean[k];
      total += -0.5 * (log_two_pi + std::log(v.variance[k])) - diff * diff / (2.0 * v.variance[k]);
    }
  return total;
}

std::vector<std::size_t> select_training_votes(std::size_t vote_count, std::size_t max_votes, std::mt19937_64& rng) {
  require(vote_count >= 1, "cannot select from an empty vote list");
  require(max_votes >= 1, "max_votes must be at least 1");
  const std::size_t upper = std::min(max_votes, vote_count);
  const std::size_t k = std::uniform_int_distribution<std::size_t>(1, upper)(rng);
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  std::vector<std::size_t> order(vote_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, vote_count - 1)(rng);
    std::swap(order[i], order[j]);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<VoteDistribution> select_training_votes(std::span<const VoteDistribution> votes, std::size_t max_votes,
                                                    std::mt19937_64& rng) {
  std::vector<VoteDistribution> out;
  for (const auto i : select_training_votes(votes.size(), max_votes, rng)) out.push_back(votes[i]);
  return out;
}

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::voting: return "voting";
    case Aggregation::max: return "max";
    case Aggregation::mean: return "mean";
  }
  return "unknown";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "voting") return Aggregation::voting;
  if (name == "max") return Aggregation::max;
  if (name == "mean") return Aggregation::mean;
  throw ValidationError("unknown aggregation '" + std::string(name) + "' (expected voting, max or mean)");
}

std::vector<double> aggregate_baseline(std::span<const std::vector<double>> features, Aggregation mode) {
  require(!features.empty(), "cannot aggregate an empty feature list");
  require(mode != Aggregation::voting, "baseline aggregation must be max or mean");
  const std::size_t d = features.front().size();
  std::vector<double> out = features.front();
  for (std::size_t i = 1; i < features.size(); ++i) {
    require(features[i].size() == d, "feature dimension mismatch");
    for (std::size_t k = 0; k < d; ++k)
      out[k] = mode == Aggregation::max ? std::max(out[k], features[i][k]) : out[k] + features[i][k];
  }
  if (mode == Aggregation::mean)
    for (auto& v : out) v /= static_cast<double>(features.size());
  return out;
}

std::vector<std::vector<double>> interpolated_latents(const LatentPosterior& posterior, std::size_t vote_index,
                                                      std::size_t steps) {
  require(vote_index < posterior.size(), "vote index out of range");
  require(steps >= 2, "interpolation needs at least two steps");
  const auto all = optimal_latent(posterior);
  const auto single = optimal_latent(LatentPosterior({posterior.votes()[vote_index]}));
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < steps; ++s) {
    if (s == 0) {
      out.push_back(all);
      continue;
    }
    if (s + 1 == steps) {
      out.push_back(single);
      continue;
    }
    const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
    std::vector<double> z(all.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = (1.0 - t) * all[k] + t * single[k];
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<double> sample_product(const LatentPosterior& posterior, std::mt19937_64& rng) {
  auto z = optimal_latent(posterior);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    double precision = 0.0;
    for (const auto& v : posterior.votes()) precision += 1.0 / v.variance[k];
    z[k] += normal(rng) / std::sqrt(precision);
  }
  return z;
}

nn::Var optimal_latent(nn::Graph& g, nn::Var mean, nn::Var variance, std::span<const std::size_t> offsets) {
  const nn::Tensor& mu = g.value(mean);
  const nn::Tensor& var = g.value(variance);
  require(mu.shape() == var.shape(), "vote mean and variance shapes differ");
  require(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == mu.rows(),
          "vote group offsets must span all votes");
  const std::size_t groups = offsets.size() - 1, d = mu.cols();

  nn::Tensor z = nn::Tensor::matrix(groups, d);
  nn::Tensor precision = nn::Tensor::matrix(groups, d);
  for (std::size_t b = 0; b < groups; ++b) {
    require(offsets[b] < offsets[b + 1], "every group needs at least one vote");
    for (std::size_t r = offsets[b]; r < offsets[b + 1]; ++r)
      for (std::size_t k = 0; k < d; ++k) {
        z.at(b, k) += mu.at(r, k) / var.at(r, k);
        precision.at(b, k) += 1.0 / var.at(r, k);
      }
    for (std::size_t k = 0; k < d; ++k) z.at(b, k) /= precision.at(b, k);
  }

  std::vector<std::size_t> bounds(offsets.begin(), offsets.end());
  nn::Tensor z_copy = z;
  // dz/dmu_i = (1/var_i) / P,  dz/dvar_i = (z - mu_i) / (var_i^2 P)
  return g.record(std::move(z), {mean, variance},
                  [mean, variance, d, bounds = std::move(bounds), precision = std::move(precision),
                   z = std::move(z_copy)](nn::Graph& g, const nn::Tensor& dz) {
                    const nn::Tensor& mu = g.value(mean);
                    const nn::Tensor& var = g.value(variance);
                    const bool want_mu = g.requires_grad(mean);
                    const bool want_var = g.requires_grad(variance);
                    for (std::size_t b = 0; b + 1 < bounds.size(); ++b)
                      for (std::size_t r = bounds[b]; r < bounds[b + 1]; ++r)
                        for (std::size_t k = 0; k < d; ++k) {
                          const double w = dz.at(b, k) / (var.at(r, k) * precision.at(b, k));
                          if (want_mu) g.grad(mean).at(r, k) += w;
                          if (want_var) g.grad(variance).at(r, k) += w * (z.at(b, k) - mu.at(r, k)) / var.at(r, k);
                        }
                  });
}

}  // namespace psv::voting
