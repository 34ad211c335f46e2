#include "psv/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "psv/error.hpp"

namespace psv::data {

namespace fs = std::filesystem;

void Dataset::validate() const {
  for (const auto& s : samples) {
    geometry::validate(s.cloud);
    require(s.label >= 0 && (class_names.empty() || static_cast<std::size_t>(s.label) < class_names.size()),
            "sample '" + s.name + "' has label " + std::to_string(s.label) + " outside the class list");
    if (task == Task::segment) {
      require(s.cloud.has_labels(), "segmentation sample '" + s.name + "' has no part labels");
      for (const int part : s.cloud.labels)
        require(static_cast<std::size_t>(part) < num_parts,
                "sample '" + s.name + "' has part label " + std::to_string(part) + " >= " + std::to_string(num_parts));
    }
    if (task == Task::complete) {
      require(s.complete.has_value(), "completion sample '" + s.name + "' has no complete cloud");
      geometry::validate(*s.complete);
    }
  }
}

std::vector<std::string> class_directories(const fs::path& root) {
  require(fs::is_directory(root), "dataset directory does not exist: " + root.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir, const std::set<std::string>& extensions) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && extensions.count(entry.path().extension().string())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::map<std::string, int> default_class_map(const fs::path& root) {
  std::map<std::string, int> map;
  int next = 0;
  for (const auto& name : class_directories(root)) map[name] = next++;
  return map;
}

}  // namespace

std::vector<Sample> load_class_dir(const fs::path& root, const std::map<std::string, int>& class_map,
                                   std::size_t off_points, std::uint64_t seed) {
  const auto map = class_map.empty() ? default_class_map(root) : class_map;
  std::vector<Sample> samples;
  for (const auto& dir_name : class_directories(root)) {
    const auto it = map.find(dir_name);
    if (it == map.end()) continue;
    for (const auto& file : sorted_files(root / dir_name, {".xyz", ".off"})) {
      Sample s;
      s.label = it->second;
      s.name = dir_name + "/" + file.filename().string();
      if (file.extension() == ".off") {
        require(off_points > 0, "OFF file found but no surface sample count given: " + file.string());
        s.cloud = geometry::sample_mesh_surface(geometry::read_off(file), off_points, seed + samples.size());
      } else {
        s.cloud = geometry::read_xyz(file);
      }
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<Sample> load_xyz_dir(const fs::path& root, std::map<std::string, int> class_map) {
  const auto map = class_map.empty() ? default_class_map(root) : std::move(class_map);
  std::vector<Sample> samples;
  for (const auto& dir_name : class_directories(root)) {
    const auto it = map.find(dir_name);
    if (it == map.end()) continue;
    for (const auto& file : sorted_files(root / dir_name, {".xyz"})) {
      Sample s;
      s.label = it->second;
      s.name = dir_name + "/" + file.filename().string();
      s.cloud = geometry::read_xyz(file);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::string_view to_string(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::sphere: return "sphere";
    case ShapeFamily::box: return "box";
    case ShapeFamily::cylinder: return "cylinder";
    case ShapeFamily::cone: return "cone";
    case ShapeFamily::torus: return "torus";
  }
  return "unknown";
}

ShapeFamily parse_family(std::string_view name) {
  for (const auto f : {ShapeFamily::sphere, ShapeFamily::box, ShapeFamily::cylinder, ShapeFamily::cone,
                       ShapeFamily::torus})
    if (to_string(f) == name) return f;
  throw ValidationError("unknown shape family '" + std::string(name) + "'");
}

std::size_t part_count(ShapeFamily family) { return family == ShapeFamily::box ? 3 : 2; }

void ProceduralShapeSpec::validate() const {
  require(points >= 64, "procedural clouds need at least 64 points");
  require(jitter_sigma >= 0.0, "jitter sigma must be non-negative");
  for (const auto& [lo, hi] : {box_extent, radius, height, torus_major, torus_minor})
    require(lo > 0.0 && hi >= lo, "procedural size ranges must be positive and ordered");
  require(torus_minor.second < torus_major.first, "torus minor radius must stay below the major radius");
}

namespace {

struct SurfacePoint {
  Vec3 p;
  int part;
};

class ShapeSampler {
 public:
  ShapeSampler(const ProceduralShapeSpec& spec, std::mt19937_64& rng) : spec_(spec), rng_(rng) {
    const auto draw = [&](std::pair<double, double> range) {
      return std::uniform_real_distribution<double>(range.first, range.second)(rng_);
    };
    switch (spec.family) {
      case ShapeFamily::sphere: break;
      case ShapeFamily::box: a_ = draw(spec.box_extent), b_ = draw(spec.box_extent), c_ = draw(spec.box_extent); break;
      case ShapeFamily::cylinder:
      case ShapeFamily::cone: a_ = draw(spec.radius), b_ = draw(spec.height); break;
      case ShapeFamily::torus: a_ = draw(spec.torus_major), b_ = draw(spec.torus_minor); break;
    }
  }

  SurfacePoint next() {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    switch (spec_.family) {
      case ShapeFamily::sphere: {
        Vec3 g{};
        do {
          g = {normal_(rng_), normal_(rng_), normal_(rng_)};
        } while (norm(g) < 1e-12);
        g = (1.0 / norm(g)) * g;
        return {g, g[2] >= 0.0 ? 0 : 1};
      }
      case ShapeFamily::box: {
        const std::array<double, 3> half{a_ / 2, b_ / 2, c_ / 2};
        const std::array<double, 3> areas{b_ * c_, a_ * c_, a_ * b_};
        const double pick = unit() * (areas[0] + areas[1] + areas[2]);
        const int axis = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
        Vec3 p{};
        for (int k = 0; k < 3; ++k) p[k] = (2.0 * unit() - 1.0) * half[k];
        p[axis] = unit() < 0.5 ? -half[axis] : half[axis];
        return {p, axis};
      }
      case ShapeFamily::cylinder: {
        const double r = a_, h = b_;
        const double side = two_pi * r * h, caps = two_pi * r * r;
        const double theta = two_pi * unit();
        if (unit() * (side + caps) < side) return {{r * std::cos(theta), r * std::sin(theta), (unit() - 0.5) * h}, 0};
        const double rho = r * std::sqrt(unit());
        return {{rho * std::cos(theta), rho * std::sin(theta), unit() < 0.5 ? -h / 2 : h / 2}, 1};
      }
      case ShapeFamily::cone: {
        const double r = a_, h = b_;
        const double lateral = std::numbers::pi * r * std::sqrt(r * r + h * h), base = std::numbers::pi * r * r;
        const double theta = two_pi * unit();
        if (unit() * (lateral + base) < lateral) {
          const double t = std::sqrt(unit());
          return {{r * t * std::cos(theta), r * t * std::sin(theta), h / 2 - t * h}, 0};
        }
        const double rho = r * std::sqrt(unit());
        return {{rho * std::cos(theta), rho * std::sin(theta), -h / 2}, 1};
      }
      case ShapeFamily::torus: {
        const double big = a_, small = b_;
        while (true) {
          const double theta = two_pi * unit(), phi = two_pi * unit();
          const double ring = big + small * std::cos(phi);
          if (unit() * (big + small) > ring) continue;
          return {{ring * std::cos(theta), ring * std::sin(theta), small * std::sin(phi)}, std::cos(phi) >= 0.0 ? 0 : 1};
        }
      }
    }
    throw ValidationError("unknown shape family");
  }

 private:
  double unit() { return unit_(rng_); }

  const ProceduralShapeSpec& spec_;
  std::mt19937_64& rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  double a_ = 1.0, b_ = 1.0, c_ = 1.0;
};

}  // namespace

std::vector<Sample> generate_procedural(const ProceduralShapeSpec& spec, std::size_t n_clouds, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, spec.jitter_sigma > 0.0 ? spec.jitter_sigma : 1.0);
  const int label = spec.label >= 0 ? spec.label : static_cast<int>(spec.family);

  std::vector<Sample> samples;
  samples.reserve(n_clouds);
  for (std::size_t i = 0; i < n_clouds; ++i) {
    ShapeSampler sampler(spec, rng);
    Sample s;
    s.label = label;
    s.name = std::string(to_string(spec.family)) + "_" + std::to_string(i);
    s.cloud.points.reserve(spec.points);
    s.cloud.labels.reserve(spec.points);
    double max_norm = 0.0;
    for (std::size_t k = 0; k < spec.points; ++k) {
      auto [p, part] = sampler.next();
      if (spec.jitter_sigma > 0.0)
        for (auto& c : p) c += jitter(rng);
      max_norm = std::max(max_norm, norm(p));
      s.cloud.points.push_back(p);
      s.cloud.labels.push_back(part);
    }
    for (auto& p : s.cloud.points) p = (1.0 / max_norm) * p;
    samples.push_back(std::move(s));
  }
  return samples;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& samples, double train_fraction,
                                                          std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must be in (0, 1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(samples.size())));
  std::vector<bool> is_train(samples.size(), false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;

  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < samples.size(); ++i) (is_train[i] ? out.first : out.second).push_back(samples[i]);
  return out;
}

std::vector<Sample> make_completion_pairs(const std::vector<Sample>& samples, std::uint64_t seed,
                                          std::size_t minimum_points) {
  std::vector<Sample> pairs;
  pairs.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& source = samples[i];
    Sample s;
    s.label = source.label;
    s.name = source.name;
    s.complete = source.complete.value_or(source.cloud);
    s.cloud = geometry::simulate_plane_cut(*s.complete, seed + 7919 * i, minimum_points).cloud;
    pairs.push_back(std::move(s));
  }
  return pairs;
}

std::vector<Sample> load_completion_pairs(const fs::path& root, const std::map<std::string, int>& class_map) {
  require(fs::is_directory(root), "dataset directory does not exist: " + root.string());
  const auto load_dir = [](const fs::path& dir, int label, const std::string& prefix, std::vector<Sample>& out) {
    static const std::string kPartial = "_partial.xyz";
    static const std::string kComplete = "_complete.xyz";
    for (const auto& file : sorted_files(dir, {".xyz"})) {
      const std::string name = file.filename().string();
      const bool partial = name.size() > kPartial.size() && name.ends_with(kPartial);
      const bool complete = name.size() > kComplete.size() && name.ends_with(kComplete);
      if (complete) {
        const auto stem = name.substr(0, name.size() - kComplete.size());
        require(fs::exists(dir / (stem + kPartial)), "missing pair file " + (dir / (stem + kPartial)).string());
        continue;
      }
      if (!partial) continue;
      const auto stem = name.substr(0, name.size() - kPartial.size());
      const auto twin = dir / (stem + kComplete);
      require(fs::exists(twin), "missing pair file " + twin.string());
      Sample s;
      s.label = label;
      s.name = prefix + stem;
      s.cloud = geometry::read_xyz(file);
      s.complete = geometry::read_xyz(twin);
      out.push_back(std::move(s));
    }
  };

  std::vector<Sample> samples;
  const auto dirs = class_directories(root);
  if (dirs.empty()) {
    load_dir(root, 0, "", samples);
    return samples;
  }
  const auto map = class_map.empty() ? default_class_map(root) : class_map;
  for (const auto& d : dirs) {
    const auto it = map.find(d);
    if (it != map.end()) load_dir(root / d, it->second, d + "/", samples);
  }
  return samples;
}

}  // namespace psv::data
