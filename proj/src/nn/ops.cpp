#include "psv/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "psv/error.hpp"
#include "psv/kernels/kernels.hpp"

namespace psv::nn {

namespace {

void check_offsets(std::span<const std::size_t> offsets, std::size_t rows) {
  require(offsets.size() >= 2, "segment offsets need at least one segment");
  require(offsets.front() == 0 && offsets.back() == rows, "segment offsets must span all rows");
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s)
    require(offsets[s] < offsets[s + 1], "segments must be non-empty and increasing");
}

void accumulate(std::span<double> dst, std::span<const double> src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
}

}  // namespace

Var matmul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  require(bv.rank() == 2 && av.cols() == bv.rows(),
          "matmul shape mismatch " + av.shape_string() + " x " + bv.shape_string());
  const std::size_t n = av.rows(), in = av.cols(), out = bv.cols();
  Tensor y = Tensor::matrix(n, out);
  kernels::parallel::gemm_nn(n, in, out, av.values(), bv.values(), y.values());
  return g.record(std::move(y), {a, b}, [a, b, n, in, out](Graph& g, const Tensor& dy) {
    if (g.requires_grad(a)) kernels::parallel::gemm_nt(n, out, in, dy.values(), g.value(b).values(), g.grad(a).values());
    if (g.requires_grad(b)) kernels::parallel::gemm_tn(in, n, out, g.value(a).values(), dy.values(), g.grad(b).values());
  });
}

Var dense(Graph& g, Var x, Var w, Var b) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  const Tensor& bv = g.value(b);
  require(wv.rank() == 2 && xv.cols() == wv.rows(),
          "dense shape mismatch: input " + xv.shape_string() + ", weights " + wv.shape_string());
  require(bv.size() == wv.cols(), "dense bias size " + std::to_string(bv.size()) + " != " + std::to_string(wv.cols()));
  const std::size_t n = xv.rows(), in = xv.cols(), out = wv.cols();
  Tensor y = Tensor::matrix(n, out);
  for (std::size_t r = 0; r < n; ++r) std::copy(bv.values().begin(), bv.values().end(), y.row(r).begin());
  kernels::parallel::gemm_nn(n, in, out, xv.values(), wv.values(), y.values());
  return g.record(std::move(y), {x, w, b}, [x, w, b, n, in, out](Graph& g, const Tensor& dy) {
    if (g.requires_grad(x)) kernels::parallel::gemm_nt(n, out, in, dy.values(), g.value(w).values(), g.grad(x).values());
    if (g.requires_grad(w)) kernels::parallel::gemm_tn(in, n, out, g.value(x).values(), dy.values(), g.grad(w).values());
    if (g.requires_grad(b)) {
      auto db = g.grad(b).values();
      for (std::size_t r = 0; r < n; ++r) accumulate(db, dy.row(r));
    }
  });
}

Var relu(Graph& g, Var x) {
  Tensor y = g.value(x);
  // Written so that NaN passes through instead of being clamped away.
  for (auto& v : y.values()) v = v < 0.0 ? 0.0 : v;
  return g.record(std::move(y), {x}, [x](Graph& g, const Tensor& dy) {
    const auto xv = g.value(x).values();
    auto dx = g.grad(x).values();
    for (std::size_t k = 0; k < dx.size(); ++k)
      if (xv[k] > 0.0) dx[k] += dy[k];
  });
}

Var softplus(Graph& g, Var x, double floor) {
  Tensor y = g.value(x);
  for (auto& v : y.values()) v = std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0) + floor;
  return g.record(std::move(y), {x}, [x](Graph& g, const Tensor& dy) {
    const auto xv = g.value(x).values();
    auto dx = g.grad(x).values();
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k] / (1.0 + std::exp(-xv[k]));
  });
}

Var batch_norm(Graph& g, Var x, Var gamma, Var beta, const BatchNormState& state, Mode mode) {
  const Tensor& xv = g.value(x);
  const std::size_t n = xv.rows(), f = xv.cols();
  require(g.value(gamma).size() == f && g.value(beta).size() == f, "batch norm feature count mismatch");
  require(state.running_mean && state.running_var, "batch norm needs running statistics");

  std::vector<double> mu(f, 0.0), inv_std(f, 0.0);
  if (mode == Mode::train) {
    require(n >= 2, "batch norm in train mode needs a batch of at least 2, got " + std::to_string(n));
    std::vector<double> var(f, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < f; ++c) mu[c] += xv.at(r, c);
    for (auto& m : mu) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < f; ++c) {
        const double d = xv.at(r, c) - mu[c];
        var[c] += d * d;
      }
    for (std::size_t c = 0; c < f; ++c) {
      var[c] /= static_cast<double>(n);
      inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);
      auto& rm = (*state.running_mean)[c];
      auto& rv = (*state.running_var)[c];
      rm = (1.0 - state.momentum) * rm + state.momentum * mu[c];
      rv = (1.0 - state.momentum) * rv + state.momentum * var[c] * static_cast<double>(n) / static_cast<double>(n - 1);
    }
  } else {
    for (std::size_t c = 0; c < f; ++c) {
      mu[c] = (*state.running_mean)[c];
      inv_std[c] = 1.0 / std::sqrt((*state.running_var)[c] + state.epsilon);
    }
  }

  const auto gv = g.value(gamma).values();
  const auto bv = g.value(beta).values();
  Tensor normalized = Tensor::matrix(n, f);
  Tensor y = Tensor::matrix(n, f);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) {
      const double h = (xv.at(r, c) - mu[c]) * inv_std[c];
      normalized.at(r, c) = h;
      y.at(r, c) = gv[c] * h + bv[c];
    }

  return g.record(std::move(y), {x, gamma, beta},
                  [x, gamma, beta, n, f, mode, inv_std, normalized = std::move(normalized)](Graph& g,
                                                                                             const Tensor& dy) {
                    std::vector<double> sum_dy(f, 0.0), sum_dy_h(f, 0.0);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < f; ++c) {
                        sum_dy[c] += dy.at(r, c);
                        sum_dy_h[c] += dy.at(r, c) * normalized.at(r, c);
                      }
                    if (g.requires_grad(gamma)) accumulate(g.grad(gamma).values(), sum_dy_h);
                    if (g.requires_grad(beta)) accumulate(g.grad(beta).values(), sum_dy);
                    if (!g.requires_grad(x)) return;
                    const auto gv = g.value(gamma).values();
                    Tensor& dx = g.grad(x);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < f; ++c) {
                        const double k = gv[c] * inv_std[c];
                        if (mode == Mode::train)
                          dx.at(r, c) += k * (dy.at(r, c) - inv_n * sum_dy[c] - normalized.at(r, c) * inv_n * sum_dy_h[c]);
                        else
                          dx.at(r, c) += k * dy.at(r, c);
                      }
                  });
}

Var dropout(Graph& g, Var x, double p, Mode mode, std::mt19937_64& rng) {
  require(p >= 0.0 && p < 1.0, "dropout probability must be in [0, 1)");
  if (mode == Mode::eval || p == 0.0) return x;
  Tensor y = g.value(x);
  std::vector<double> mask(y.size());
  std::bernoulli_distribution keep(1.0 - p);
  const double factor = 1.0 / (1.0 - p);
  for (std::size_t k = 0; k < y.size(); ++k) {
    mask[k] = keep(rng) ? factor : 0.0;
    y[k] *= mask[k];
  }
  return g.record(std::move(y), {x}, [x, mask = std::move(mask)](Graph& g, const Tensor& dy) {
    auto dx = g.grad(x).values();
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k] * mask[k];
  });
}

Var max_pool_segments(Graph& g, Var x, std::span<const std::size_t> offsets) {
  const Tensor& xv = g.value(x);
  check_offsets(offsets, xv.rows());
  const std::size_t segments = offsets.size() - 1, f = xv.cols();
  Tensor y = Tensor::matrix(segments, f);
  std::vector<std::size_t> argmax(segments * f);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t c = 0; c < f; ++c) {
      std::size_t best = offsets[s];
      for (std::size_t r = offsets[s] + 1; r < offsets[s + 1]; ++r)
        if (xv.at(r, c) > xv.at(best, c)) best = r;
      argmax[s * f + c] = best;
      y.at(s, c) = xv.at(best, c);
    }
  }
  return g.record(std::move(y), {x}, [x, f, argmax = std::move(argmax)](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad(x);
    for (std::size_t k = 0; k < argmax.size(); ++k) dx.at(argmax[k], k % f) += dy[k];
  });
}

Var mean_pool_segments(Graph& g, Var x, std::span<const std::size_t> offsets) {
  const Tensor& xv = g.value(x);
  check_offsets(offsets, xv.rows());
  const std::size_t segments = offsets.size() - 1, f = xv.cols();
  std::vector<std::size_t> bounds(offsets.begin(), offsets.end());
  Tensor y = Tensor::matrix(segments, f);
  for (std::size_t s = 0; s < segments; ++s) {
    const double inv = 1.0 / static_cast<double>(bounds[s + 1] - bounds[s]);
    for (std::size_t r = bounds[s]; r < bounds[s + 1]; ++r)
      for (std::size_t c = 0; c < f; ++c) y.at(s, c) += xv.at(r, c) * inv;
  }
  return g.record(std::move(y), {x}, [x, f, bounds = std::move(bounds)](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad(x);
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
      const double inv = 1.0 / static_cast<double>(bounds[s + 1] - bounds[s]);
      for (std::size_t r = bounds[s]; r < bounds[s + 1]; ++r)
        for (std::size_t c = 0; c < f; ++c) dx.at(r, c) += dy.at(s, c) * inv;
    }
  });
}

Var max_pool_set(Graph& g, Var x) {
  const auto shape = g.value(x).shape();
  require(shape.size() == 3 && shape[1] >= 1, "max_pool_set expects a [B,N,F] tensor with N >= 1");
  std::vector<std::size_t> offsets(shape[0] + 1);
  for (std::size_t b = 0; b <= shape[0]; ++b) offsets[b] = b * shape[1];
  return max_pool_segments(g, x, offsets);
}

Var concat_cols(Graph& g, std::span<const Var> parts) {
  require(!parts.empty(), "concat needs at least one input");
  const std::size_t n = g.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(g.value(p).rows() == n, "concat row count mismatch");
    widths.push_back(g.value(p).cols());
    total += widths.back();
  }
  Tensor y = Tensor::matrix(n, total);
  std::size_t col = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& pv = g.value(parts[i]);
    for (std::size_t r = 0; r < n; ++r) std::copy(pv.row(r).begin(), pv.row(r).end(), y.row(r).begin() + col);
    col += widths[i];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(y), parts,
                  [inputs, widths, n](Graph& g, const Tensor& dy) {
                    std::size_t col = 0;
                    for (std::size_t i = 0; i < inputs.size(); ++i) {
                      if (g.requires_grad(inputs[i])) {
                        Tensor& dx = g.grad(inputs[i]);
                        for (std::size_t r = 0; r < n; ++r)
                          for (std::size_t c = 0; c < widths[i]; ++c) dx.at(r, c) += dy.at(r, col + c);
                      }
                      col += widths[i];
                    }
                  });
}

Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = g.value(x);
  require(begin < end && end <= xv.cols(), "column slice out of range");
  const std::size_t n = xv.rows(), w = end - begin;
  Tensor y = Tensor::matrix(n, w);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < w; ++c) y.at(r, c) = xv.at(r, begin + c);
  return g.record(std::move(y), {x}, [x, begin, n, w](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad(x);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) dx.at(r, begin + c) += dy.at(r, c);
  });
}

Var gather_rows(Graph& g, Var x, std::vector<std::size_t> rows) {
  const Tensor& xv = g.value(x);
  const std::size_t f = xv.cols();
  Tensor y = Tensor::matrix(rows.size(), f);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < xv.rows(), "gather row index out of range");
    std::copy(xv.row(rows[i]).begin(), xv.row(rows[i]).end(), y.row(i).begin());
  }
  return g.record(std::move(y), {x}, [x, rows = std::move(rows)](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad(x);
    for (std::size_t i = 0; i < rows.size(); ++i) accumulate(dx.row(rows[i]), dy.row(i));
  });
}

Var repeat_rows(Graph& g, Var x, std::span<const std::size_t> counts) {
  const Tensor& xv = g.value(x);
  require(counts.size() == xv.rows(), "repeat_rows needs one count per row");
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  Tensor y = Tensor::matrix(total, xv.cols());
  std::vector<std::size_t> source(total);
  std::size_t out = 0;
  for (std::size_t r = 0; r < counts.size(); ++r)
    for (std::size_t k = 0; k < counts[r]; ++k, ++out) {
      std::copy(xv.row(r).begin(), xv.row(r).end(), y.row(out).begin());
      source[out] = r;
    }
  return g.record(std::move(y), {x}, [x, source = std::move(source)](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad(x);
    for (std::size_t i = 0; i < source.size(); ++i) accumulate(dx.row(source[i]), dy.row(i));
  });
}

Var add(Graph& g, Var a, Var b) {
  require(g.value(a).shape() == g.value(b).shape(), "add shape mismatch");
  Tensor y = g.value(a);
  accumulate(y.values(), g.value(b).values());
  return g.record(std::move(y), {a, b}, [a, b](Graph& g, const Tensor& dy) {
    if (g.requires_grad(a)) accumulate(g.grad(a).values(), dy.values());
    if (g.requires_grad(b)) accumulate(g.grad(b).values(), dy.values());
  });
}

Var scale(Graph& g, Var x, double factor) {
  Tensor y = g.value(x);
  for (auto& v : y.values()) v *= factor;
  return g.record(std::move(y), {x}, [x, factor](Graph& g, const Tensor& dy) {
    auto dx = g.grad(x).values();
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += factor * dy[k];
  });
}

Var square(Graph& g, Var x) {
  Tensor y = g.value(x);
  for (auto& v : y.values()) v *= v;
  return g.record(std::move(y), {x}, [x](Graph& g, const Tensor& dy) {
    const auto xv = g.value(x).values();
    auto dx = g.grad(x).values();
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += 2.0 * xv[k] * dy[k];
  });
}

Var sum(Graph& g, Var x) {
  const auto xv = g.value(x).values();
  const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
  return g.record(Tensor::scalar(total), {x}, [x](Graph& g, const Tensor& dy) {
    for (auto& v : g.grad(x).values()) v += dy[0];
  });
}

Var mean(Graph& g, Var x) {
  const std::size_t n = g.value(x).size();
  require(n > 0, "mean of an empty tensor");
  return scale(g, sum(g, x), 1.0 / static_cast<double>(n));
}

Var softmax_cross_entropy(Graph& g, Var logits, std::span<const int> targets) {
  const Tensor& lv = g.value(logits);
  const std::size_t n = lv.rows(), k = lv.cols();
  require(targets.size() == n, "cross entropy needs one target per row");
  Tensor probs = Tensor::matrix(n, k);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    require(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < k,
            "target " + std::to_string(targets[r]) + " outside [0," + std::to_string(k) + ")");
    const auto row = lv.row(r);
    const double top = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(row[c] - top);
    for (std::size_t c = 0; c < k; ++c) probs.at(r, c) = std::exp(row[c] - top) / z;
    loss += (std::log(z) + top) - row[static_cast<std::size_t>(targets[r])];
  }
  loss /= static_cast<double>(n);
  std::vector<int> labels(targets.begin(), targets.end());
  return g.record(Tensor::scalar(loss), {logits},
                  [logits, n, k, probs = std::move(probs), labels = std::move(labels)](Graph& g, const Tensor& dy) {
                    Tensor& dl = g.grad(logits);
                    const double w = dy[0] / static_cast<double>(n);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < k; ++c)
                        dl.at(r, c) += w * (probs.at(r, c) - (static_cast<int>(c) == labels[r] ? 1.0 : 0.0));
                  });
}

Var chamfer_loss(Graph& g, Var points, std::span<const std::size_t> offsets,
                 std::span<const std::span<const Vec3>> targets) {
  const Tensor& pv = g.value(points);
  require(pv.cols() == 3, "chamfer loss expects 3 columns");
  check_offsets(offsets, pv.rows());
  const std::size_t batch = offsets.size() - 1;
  require(targets.size() == batch, "chamfer loss needs one target per example");

  std::vector<Vec3> pred(pv.rows());
  for (std::size_t r = 0; r < pv.rows(); ++r) pred[r] = {pv.at(r, 0), pv.at(r, 1), pv.at(r, 2)};

  // Per example: nearest target for every prediction and vice versa.
  std::vector<std::uint32_t> pred_nn(pred.size());
  std::vector<std::vector<std::uint32_t>> target_nn(batch);
  std::vector<std::vector<Vec3>> target_copy(batch);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    require(!targets[b].empty(), "chamfer loss target is empty");
    const std::span<const Vec3> p(pred.data() + offsets[b], offsets[b + 1] - offsets[b]);
    std::vector<double> p_sq(p.size()), t_sq(targets[b].size());
    target_nn[b].resize(targets[b].size());
    kernels::parallel::nearest_sq(p, targets[b], p_sq, std::span(pred_nn).subspan(offsets[b], p.size()));
    kernels::parallel::nearest_sq(targets[b], p, t_sq, target_nn[b]);
    loss += std::accumulate(p_sq.begin(), p_sq.end(), 0.0) / static_cast<double>(p.size()) +
            std::accumulate(t_sq.begin(), t_sq.end(), 0.0) / static_cast<double>(t_sq.size());
    target_copy[b].assign(targets[b].begin(), targets[b].end());
  }
  loss /= static_cast<double>(batch);

  std::vector<std::size_t> bounds(offsets.begin(), offsets.end());
  return g.record(Tensor::scalar(loss), {points},
                  [points, batch, bounds = std::move(bounds), pred = std::move(pred), pred_nn = std::move(pred_nn),
                   target_nn = std::move(target_nn), target_copy = std::move(target_copy)](Graph& g, const Tensor& dy) {
                    Tensor& dp = g.grad(points);
                    const double w = dy[0] / static_cast<double>(batch);
                    for (std::size_t b = 0; b < batch; ++b) {
                      const std::size_t m = bounds[b + 1] - bounds[b];
                      const auto& t = target_copy[b];
                      const double wp = 2.0 * w / static_cast<double>(m);
                      const double wt = 2.0 * w / static_cast<double>(t.size());
                      for (std::size_t j = bounds[b]; j < bounds[b + 1]; ++j) {
                        const Vec3 d = pred[j] - t[pred_nn[j]];
                        for (int c = 0; c < 3; ++c) dp.at(j, c) += wp * d[c];
                      }
                      for (std::size_t k = 0; k < t.size(); ++k) {
                        const std::size_t j = bounds[b] + target_nn[b][k];
                        const Vec3 d = pred[j] - t[k];
                        for (int c = 0; c < 3; ++c) dp.at(j, c) += wt * d[c];
                      }
                    }
                  });
}

}  // namespace psv::nn
