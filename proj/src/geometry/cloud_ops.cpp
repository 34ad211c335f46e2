#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "psv/error.hpp"
#include "psv/geometry.hpp"
#include "psv/kernels/kernels.hpp"

namespace psv::geometry {

void validate(const PointCloud& cloud) {
  require(!cloud.empty(), "point cloud is empty");
  for (const auto& p : cloud.points)
    require(std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]), "point cloud has non-finite coordinates");
  require(cloud.labels.empty() || cloud.labels.size() == cloud.points.size(),
          "label count " + std::to_string(cloud.labels.size()) + " does not match point count " +
              std::to_string(cloud.points.size()));
}

Normalized normalize_unit_sphere(const PointCloud& cloud) {
  validate(cloud);
  Vec3 center{0.0, 0.0, 0.0};
  for (const auto& p : cloud.points) center = center + p;
  center = (1.0 / static_cast<double>(cloud.size())) * center;

  Normalized out;
  out.cloud.labels = cloud.labels;
  out.cloud.points.reserve(cloud.size());
  double max_norm = 0.0;
  for (const auto& p : cloud.points) {
    out.cloud.points.push_back(p - center);
    max_norm = std::max(max_norm, norm(out.cloud.points.back()));
  }
  if (max_norm <= 1e-12 * (1.0 + norm(center))) {
    for (auto& p : out.cloud.points) p = {0.0, 0.0, 0.0};
    out.degenerate = true;
    return out;
  }
  const double scale = 1.0 / max_norm;
  for (auto& p : out.cloud.points) p = scale * p;
  return out;
}

std::vector<std::uint32_t> farthest_point_sampling_from(const PointCloud& cloud, std::size_t k,
                                                        std::uint32_t first_index) {
  const std::size_t n = cloud.size();
  require(k >= 1 && k <= n, "farthest point sampling needs 1 <= k <= " + std::to_string(n) + ", got k=" +
                                std::to_string(k));
  require(first_index < n, "farthest point sampling start index out of range");

  std::vector<std::uint32_t> picked;
  picked.reserve(k);
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
  std::uint32_t current = first_index;
  for (std::size_t step = 0; step < k; ++step) {
    picked.push_back(current);
    kernels::parallel::update_min_sq(cloud.points, cloud.points[current], min_sq);
    // Selected points are excluded outright so duplicates cannot be re-picked.
    for (const auto idx : picked) min_sq[idx] = -1.0;
    if (step + 1 == k) break;
    current = static_cast<std::uint32_t>(std::max_element(min_sq.begin(), min_sq.end()) - min_sq.begin());
  }
  return picked;
}

std::vector<std::uint32_t> farthest_point_sampling(const PointCloud& cloud, std::size_t k, std::uint64_t seed) {
  require(!cloud.empty(), "farthest point sampling on an empty cloud");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  return farthest_point_sampling_from(cloud, k, static_cast<std::uint32_t>(pick(rng)));
}

std::vector<LocalPointSet> build_partition(const PointCloud& cloud, const PartitionOptions& options,
                                           std::uint64_t seed) {
  validate(cloud);
  require(options.n_sets >= 1, "partition needs at least one set");
  require(options.radius > 0.0, "partition radius must be positive");
  require(options.max_points_per_set >= 1, "max_points_per_set must be positive");

  const auto centroids = farthest_point_sampling(cloud, options.n_sets, seed);
  const double radius_sq = options.radius * options.radius;
  std::vector<double> dist_sq(cloud.size());
  std::vector<std::uint32_t> members;

  std::vector<LocalPointSet> sets;
  sets.reserve(centroids.size());
  for (const auto c : centroids) {
    const Vec3 centroid = cloud.points[c];
    std::fill(dist_sq.begin(), dist_sq.end(), std::numeric_limits<double>::infinity());
    kernels::parallel::update_min_sq(cloud.points, centroid, dist_sq);

    members.clear();
    for (std::uint32_t i = 0; i < cloud.size(); ++i)
      if (dist_sq[i] <= radius_sq) members.push_back(i);
    // The centroid itself is at distance zero, so members is never empty.
    if (members.size() > options.max_points_per_set) {
      std::stable_sort(members.begin(), members.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return dist_sq[a] < dist_sq[b]; });
      members.resize(options.max_points_per_set);
      std::sort(members.begin(), members.end());
    }

    LocalPointSet set;
    set.centroid = centroid;
    set.radius = options.radius;
    set.source_indices = members;
    set.relative_points.reserve(members.size());
    for (const auto i : members) set.relative_points.push_back(cloud.points[i] - centroid);
    sets.push_back(std::move(set));
  }
  return sets;
}

PointCloud cut_by_plane(const PointCloud& cloud, const Plane& plane, std::vector<std::uint32_t>* kept) {
  PointCloud out;
  if (kept) kept->clear();
  for (std::uint32_t i = 0; i < cloud.size(); ++i) {
    if (dot(cloud.points[i], plane.normal) > 0.0) {
      out.points.push_back(cloud.points[i]);
      if (cloud.has_labels()) out.labels.push_back(cloud.labels[i]);
      if (kept) kept->push_back(i);
    }
  }
  return out;
}

PlaneCut simulate_plane_cut(const PointCloud& cloud, std::uint64_t seed, std::size_t minimum_points) {
  validate(cloud);
  constexpr int kResamples = 10;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int attempt = 0; attempt <= kResamples; ++attempt) {
    Vec3 n{normal(rng), normal(rng), normal(rng)};
    const double len = norm(n);
    if (len < 1e-12) continue;
    n = (1.0 / len) * n;

    for (const double sign : {1.0, -1.0}) {
      PlaneCut cut;
      cut.plane.normal = sign * n;
      cut.cloud = cut_by_plane(cloud, cut.plane, &cut.kept_indices);
      if (cut.cloud.size() >= std::max<std::size_t>(minimum_points, 1)) return cut;
    }
  }
  throw ValidationError("plane cut kept fewer than " + std::to_string(minimum_points) + " points after " +
                        std::to_string(kResamples) + " resamples");
}

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  require(!a.empty() && !b.empty(), "chamfer distance needs two non-empty clouds");
  std::vector<double> a_to_b(a.size());
  std::vector<double> b_to_a(b.size());
  std::vector<std::uint32_t> index_a(a.size());
  std::vector<std::uint32_t> index_b(b.size());
  kernels::parallel::nearest_sq(a, b, a_to_b, index_a);
  kernels::parallel::nearest_sq(b, a, b_to_a, index_b);
  // Serial sums keep the result independent of the thread count.
  const double sum_ab = std::accumulate(a_to_b.begin(), a_to_b.end(), 0.0);
  const double sum_ba = std::accumulate(b_to_a.begin(), b_to_a.end(), 0.0);
  return sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size());
}

}  // namespace psv::geometry
