#pragma once

// Differentiable operations on rank-2 values (rows x features).
// Sets are ragged: `offsets` has one entry per segment plus a final end, so
// segment s spans rows [offsets[s], offsets[s+1]).

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "psv/nn/graph.hpp"
#include "psv/vec3.hpp"

namespace psv::nn {

/// x[B,I] * w[I,O] + b[O]
Var dense(Graph& g, Var x, Var w, Var b);
Var matmul(Graph& g, Var a, Var b);

Var relu(Graph& g, Var x);

/// softplus(x) + floor, elementwise.
Var softplus(Graph& g, Var x, double floor);

struct BatchNormState {
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  double momentum = 0.1;
  double epsilon = 1e-5;
};

/// Per-feature normalization over rows. Train mode uses batch statistics and
/// updates the running estimates; eval mode uses the running estimates.
Var batch_norm(Graph& g, Var x, Var gamma, Var beta, const BatchNormState& state, Mode mode);

/// Inverted dropout; identity in eval mode or when p == 0.
Var dropout(Graph& g, Var x, double p, Mode mode, std::mt19937_64& rng);

/// Per-segment, per-feature maximum. Gradient goes to the first arg-max row.
Var max_pool_segments(Graph& g, Var x, std::span<const std::size_t> offsets);
Var mean_pool_segments(Graph& g, Var x, std::span<const std::size_t> offsets);

/// Max over the middle axis of a rank-3 value [B,N,F] -> [B,F].
Var max_pool_set(Graph& g, Var x);

Var concat_cols(Graph& g, std::span<const Var> parts);
Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t end);
Var gather_rows(Graph& g, Var x, std::vector<std::size_t> rows);
/// Row i of x repeated counts[i] times, in order.
Var repeat_rows(Graph& g, Var x, std::span<const std::size_t> counts);

Var add(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double factor);
Var square(Graph& g, Var x);
Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);

/// Mean over rows of -log softmax(logits)[target].
Var softmax_cross_entropy(Graph& g, Var logits, std::span<const int> targets);

/// Mean over examples of the squared-distance Chamfer distance between the
/// predicted rows of each example (3 columns) and its fixed target cloud.
Var chamfer_loss(Graph& g, Var points, std::span<const std::size_t> offsets,
                 std::span<const std::span<const Vec3>> targets);

}  // namespace psv::nn
