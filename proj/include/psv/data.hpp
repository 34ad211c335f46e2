#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "psv/geometry.hpp"
#include "psv/task.hpp"

namespace psv::data {

struct Sample {
  /// The observed cloud (the partial one for completion pairs).
  geometry::PointCloud cloud;
  /// Class for classification, object category for segmentation/completion.
  int label = 0;
  /// Ground-truth complete cloud of a completion pair.
  std::optional<geometry::PointCloud> complete;
  std::string name;
};

struct Dataset {
  Task task = Task::classify;
  std::vector<std::string> class_names;
  /// Part count for segmentation (0 otherwise).
  std::size_t num_parts = 0;
  std::vector<Sample> samples;

  /// Throws ValidationError if labels, part labels or pairs do not fit the task.
  void validate() const;
};

/// Loads every *.xyz file under per-class subdirectories of `root`, in
/// lexicographic order. `class_map` maps directory names to labels; when empty,
/// the sorted directory names are numbered from 0. Directories missing from a
/// non-empty map are skipped.
std::vector<Sample> load_xyz_dir(const std::filesystem::path& root, std::map<std::string, int> class_map = {});

/// Like load_xyz_dir but also reads *.off meshes, sampling `off_points` points from each surface.
std::vector<Sample> load_class_dir(const std::filesystem::path& root, const std::map<std::string, int>& class_map,
                                   std::size_t off_points, std::uint64_t seed);

/// Sorted class directory names under `root`.
std::vector<std::string> class_directories(const std::filesystem::path& root);

enum class ShapeFamily { sphere, box, cylinder, cone, torus };

std::string_view to_string(ShapeFamily family);
ShapeFamily parse_family(std::string_view name);

/// Analytic surface with per-cloud size parameters drawn from the ranges below.
/// Part labels: sphere upper/lower half, box one part per face pair, cylinder
/// side/caps, cone side/base, torus outer/inner half.
struct ProceduralShapeSpec {
  ShapeFamily family = ShapeFamily::sphere;
  std::size_t points = 256;
  double jitter_sigma = 0.01;
  /// Box edge lengths.
  std::pair<double, double> box_extent{0.5, 1.5};
  /// Cylinder / cone radius and height.
  std::pair<double, double> radius{0.3, 1.0};
  std::pair<double, double> height{0.6, 2.0};
  /// Torus major / minor radius.
  std::pair<double, double> torus_major{0.6, 1.0};
  std::pair<double, double> torus_minor{0.15, 0.35};
  /// Sample label; negative means "use the family index".
  int label = -1;

  void validate() const;
};

/// Part count of a family's labelling.
std::size_t part_count(ShapeFamily family);

/// Surface-uniform samples, Gaussian jitter, then scaled into the unit sphere
/// around the shape's own center (the origin).
std::vector<Sample> generate_procedural(const ProceduralShapeSpec& spec, std::size_t n_clouds, std::uint64_t seed);

/// Seeded shuffle, then the first round(fraction * n) samples train. Both
/// halves keep the input order.
std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& samples, double train_fraction,
                                                          std::uint64_t seed);

/// Pairs each complete cloud with a plane-cut partial of itself.
std::vector<Sample> make_completion_pairs(const std::vector<Sample>& samples, std::uint64_t seed,
                                          std::size_t minimum_points = 32);

/// Reads "<stem>_partial.xyz" / "<stem>_complete.xyz" pairs from per-class
/// subdirectories (or from `root` itself when it has no subdirectories).
std::vector<Sample> load_completion_pairs(const std::filesystem::path& root,
                                          const std::map<std::string, int>& class_map = {});

}  // namespace psv::data
