#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "psv/geometry.hpp"
#include "psv/nn/layers.hpp"

namespace psv::test {

inline geometry::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  geometry::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng), u(rng)});
  return c;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// O(n*m) reference, written independently of the library kernels.
inline double brute_force_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  const auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double total = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      total += best;
    }
    return total / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

/// Checks the greedy max-min property of an FPS order by exhaustive search at
/// every step. Returns the first failing step, or -1.
inline int first_fps_violation(const geometry::PointCloud& cloud, const std::vector<std::uint32_t>& order) {
  const auto n = cloud.size();
  std::vector<bool> chosen(n, false);
  chosen[order[0]] = true;
  for (std::size_t step = 1; step < order.size(); ++step) {
    const auto min_dist = [&](std::size_t i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < step; ++s) best = std::min(best, squared_distance(cloud.points[i], cloud.points[order[s]]));
      return best;
    };
    double best_value = -1.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double d = min_dist(i);
      if (d > best_value) {
        best_value = d;
        best_index = i;
      }
    }
    if (chosen[order[step]] || min_dist(order[step]) != best_value || order[step] != best_index)
      return static_cast<int>(step);
    chosen[order[step]] = true;
  }
  return -1;
}

/// Relative difference with a floor so that near-zero pairs compare absolutely.
/// The floor sits well above central-difference rounding noise (~1e-10).
inline double relative_error(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max(floor, std::abs(a) + std::abs(b));
}

/// Compares backward() against central differences for every entry of the
/// given parameters. `loss` must rebuild the whole forward pass each call.
inline double max_gradient_error(const std::vector<nn::Parameter*>& params,
                                 const std::function<nn::Var(nn::Graph&)>& loss, double h = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    nn::Graph g;
    g.backward(loss(g));
  }
  double worst = 0.0;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      const auto eval = [&](double v) {
        p->value[i] = v;
        nn::Graph g;
        return g.value(loss(g))[0];
      };
      const double numeric = (eval(saved + h) - eval(saved - h)) / (2.0 * h);
      p->value[i] = saved;
      worst = std::max(worst, relative_error(p->grad[i], numeric));
    }
  }
  return worst;
}

/// Random fixed projection to a scalar: sum((x * w)^2) with w of shape [cols, 1].
inline nn::Var scalarize(nn::Graph& g, nn::Var x, std::uint64_t seed = 77) {
  const auto cols = g.value(x).cols();
  const nn::Var w = g.constant(nn::Tensor({cols, 1}, random_values(cols, seed)));
  return nn::sum(g, nn::square(g, nn::matmul(g, x, w)));
}

inline nn::Parameter make_param(const std::string& name, std::vector<std::size_t> shape, std::uint64_t seed,
                                double scale = 1.0) {
  std::size_t n = 1;
  for (const auto d : shape) n *= d;
  nn::Parameter p;
  p.name = name;
  p.value = nn::Tensor(std::move(shape), random_values(n, seed, scale));
  return p;
}

/// Adds small uniform noise to every parameter so zero biases do not sit on
/// ReLU kinks, then returns pointers to all of them.
inline std::vector<nn::Parameter*> jittered_parameters(nn::ParameterStore& store, const std::string& prefix,
                                                       std::uint64_t seed, double amount = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amount, amount);
  std::vector<nn::Parameter*> out;
  for (auto& p : store.parameters()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    for (auto& v : p.value.values()) v += u(rng);
    out.push_back(&p);
  }
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("psv_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

}  // namespace psv::test
