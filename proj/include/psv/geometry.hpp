#pragma once

// Non-learned point cloud math: normalization, sampling, partitioning into
// local point sets, partial-cloud simulation, Chamfer distance, and the XYZ /
// OFF file formats.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "psv/vec3.hpp"

namespace psv::geometry {

struct PointCloud {
  std::vector<Vec3> points;
  /// Optional per-point part labels; either empty or one per point.
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  [[nodiscard]] bool has_labels() const { return !labels.empty(); }
};

/// Throws ValidationError unless the cloud is non-empty, finite and has
/// consistent labels.
void validate(const PointCloud& cloud);

/// A plane through the origin, stored by its normal.
struct Plane {
  Vec3 normal{0.0, 0.0, 1.0};
};

struct LocalPointSet {
  Vec3 centroid{};
  double radius = 0.0;
  std::vector<Vec3> relative_points;
  std::vector<std::uint32_t> source_indices;
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
};

struct Normalized {
  PointCloud cloud;
  /// Set when all points coincide; the cloud is then centered but not scaled.
  bool degenerate = false;
};

/// Centers the cloud on its mean and scales it so the farthest point has norm 1.
Normalized normalize_unit_sphere(const PointCloud& cloud);

/// Greedy farthest point sampling starting from `first_index`.
/// Each pick maximizes the minimum distance to the points already chosen;
/// ties go to the lowest index.
std::vector<std::uint32_t> farthest_point_sampling_from(const PointCloud& cloud, std::size_t k,
                                                        std::uint32_t first_index);

/// Same as above, with the first index drawn from `seed`.
std::vector<std::uint32_t> farthest_point_sampling(const PointCloud& cloud, std::size_t k, std::uint64_t seed);

struct PartitionOptions {
  std::size_t n_sets = 64;
  double radius = 0.2;
  std::size_t max_points_per_set = 64;
};

/// Overlapping partition: FPS centroids, each with all points inside a ball of
/// `radius` (nearest `max_points_per_set` kept), stored centroid-relative.
std::vector<LocalPointSet> build_partition(const PointCloud& cloud, const PartitionOptions& options,
                                           std::uint64_t seed);

/// Keeps the points strictly on the positive side of `plane`. Labels follow
/// their points.
PointCloud cut_by_plane(const PointCloud& cloud, const Plane& plane, std::vector<std::uint32_t>* kept = nullptr);

struct PlaneCut {
  PointCloud cloud;
  Plane plane;
  std::vector<std::uint32_t> kept_indices;
};

/// Random plane through the origin (normal ~ N(0, I), normalized). If fewer
/// than `minimum_points` survive, the normal is flipped; if that still fails
/// the plane is redrawn up to 10 times before throwing ValidationError.
PlaneCut simulate_plane_cut(const PointCloud& cloud, std::uint64_t seed, std::size_t minimum_points = 32);

/// Mean squared nearest-neighbor distance from a to b plus from b to a.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  return chamfer_distance(a.points, b.points);
}

/// Area-weighted triangle choice followed by uniform barycentric sampling.
PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// File formats. Parse errors throw ValidationError naming source and line.

/// One point per line: x y z [label]. Blank lines and '#' comments are skipped.
PointCloud parse_xyz(std::istream& in, const std::string& source_name);
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(std::ostream& out, const PointCloud& cloud);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

/// OFF meshes; polygons with more than three vertices are fan-triangulated.
TriangleMesh parse_off(std::istream& in, const std::string& source_name);
TriangleMesh read_off(const std::filesystem::path& path);

}  // namespace psv::geometry
