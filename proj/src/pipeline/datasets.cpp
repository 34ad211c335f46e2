#include "psv/pipeline/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>

#include "psv/error.hpp"

namespace psv::pipeline {

namespace {

namespace fs = std::filesystem;

constexpr std::string_view kToyScheme = "toy://";
constexpr std::size_t kOffSurfacePoints = 1024;

struct ToyQuery {
  std::size_t count;
  std::size_t points;
  std::uint64_t seed;
};

ToyQuery parse_query(std::string_view query, ToyQuery defaults, const std::string& uri) {
  while (!query.empty()) {
    const auto amp = query.find('&');
    const auto item = query.substr(0, amp);
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
    const auto eq = item.find('=');
    require(eq != std::string_view::npos, uri + ": query item '" + std::string(item) + "' is not key=value");
    const auto key = item.substr(0, eq), value = item.substr(eq + 1);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    require(ec == std::errc{} && end == value.data() + value.size(),
            uri + ": '" + std::string(key) + "' needs a non-negative integer");
    if (key == "count") defaults.count = v;
    else if (key == "points") defaults.points = v;
    else if (key == "seed") defaults.seed = v;
    else throw ValidationError(uri + ": unknown query key '" + std::string(key) + "'");
  }
  require(defaults.count >= 2, uri + ": count must be at least 2");
  return defaults;
}

std::vector<data::Sample> families(std::initializer_list<data::ShapeFamily> list, const ToyQuery& q) {
  std::vector<data::Sample> all;
  int label = 0;
  for (const auto family : list) {
    data::ProceduralShapeSpec spec;
    spec.family = family;
    spec.points = q.points;
    spec.label = label;
    auto clouds = data::generate_procedural(spec, q.count, q.seed + 101 * static_cast<std::uint64_t>(label));
    all.insert(all.end(), std::make_move_iterator(clouds.begin()), std::make_move_iterator(clouds.end()));
    ++label;
  }
  return all;
}

DatasetSplit make_split(Task task, std::vector<std::string> names, std::size_t parts, std::vector<data::Sample> samples,
                        double fraction, std::uint64_t seed) {
  auto [train, test] = data::split(samples, fraction, seed);
  DatasetSplit out;
  out.train = {task, names, parts, std::move(train)};
  out.test = {task, std::move(names), parts, std::move(test)};
  return out;
}

DatasetSplit open_toy(const std::string& uri, Task task) {
  const std::string_view rest = std::string_view(uri).substr(kToyScheme.size());
  const auto qmark = rest.find('?');
  const std::string name(rest.substr(0, qmark));
  const auto query = qmark == std::string_view::npos ? std::string_view{} : rest.substr(qmark + 1);

  const auto expect = [&](Task wanted) {
    if (task != wanted)
      throw TaskMismatchError(uri + " is a " + std::string(to_string(wanted)) + " dataset, not " +
                              std::string(to_string(task)));
  };
  using data::ShapeFamily;
  if (name == "shapes5") {
    expect(Task::classify);
    const auto q = parse_query(query, {130, 256, 7}, uri);
    const std::initializer_list<ShapeFamily> list{ShapeFamily::sphere, ShapeFamily::box, ShapeFamily::cylinder,
                                                  ShapeFamily::cone, ShapeFamily::torus};
    std::vector<std::string> names;
    for (const auto f : list) names.emplace_back(data::to_string(f));
    return make_split(Task::classify, std::move(names), 0, families(list, q), 10.0 / 13.0, q.seed);
  }
  if (name == "cylinder_parts") {
    expect(Task::segment);
    const auto q = parse_query(query, {200, 256, 11}, uri);
    return make_split(Task::segment, {"cylinder"}, data::part_count(ShapeFamily::cylinder),
                      families({ShapeFamily::cylinder}, q), 0.8, q.seed);
  }
  if (name == "completion2") {
    expect(Task::complete);
    const auto q = parse_query(query, {125, 256, 13}, uri);
    auto samples = families({ShapeFamily::box, ShapeFamily::cylinder}, q);
    for (auto& s : samples) s.cloud.labels.clear();
    return make_split(Task::complete, {"box", "cylinder"}, 0, data::make_completion_pairs(samples, q.seed), 0.8,
                      q.seed);
  }
  throw ValidationError("unknown toy dataset '" + uri + "' (known: toy://shapes5, toy://cylinder_parts, toy://completion2)");
}

data::Dataset load_directory(const fs::path& root, Task task, const std::map<std::string, int>& class_map,
                             std::uint64_t seed) {
  data::Dataset d;
  d.task = task;
  switch (task) {
    case Task::classify: d.samples = data::load_class_dir(root, class_map, kOffSurfacePoints, seed); break;
    case Task::segment: {
      d.samples = data::load_xyz_dir(root, class_map);
      int max_part = -1;
      for (const auto& s : d.samples) {
        require(s.cloud.has_labels(), "segmentation file '" + s.name + "' has no part label column");
        max_part = std::max(max_part, *std::max_element(s.cloud.labels.begin(), s.cloud.labels.end()));
      }
      d.num_parts = static_cast<std::size_t>(max_part + 1);
      break;
    }
    case Task::complete: d.samples = data::load_completion_pairs(root, class_map); break;
  }
  return d;
}

}  // namespace

DatasetSplit open_dataset(const std::string& uri, Task task, std::uint64_t split_seed) {
  if (uri.rfind(kToyScheme, 0) == 0) return open_toy(uri, task);

  const fs::path root(uri);
  require(fs::is_directory(root), "dataset directory does not exist: " + uri);
  const bool presplit = fs::is_directory(root / "train") && fs::is_directory(root / "test");
  const fs::path class_root = presplit ? root / "train" : root;

  std::vector<std::string> names = data::class_directories(class_root);
  std::map<std::string, int> class_map;
  for (std::size_t i = 0; i < names.size(); ++i) class_map[names[i]] = static_cast<int>(i);
  if (names.empty() && task == Task::complete) names = {"default"};

  DatasetSplit out;
  if (presplit) {
    out.train = load_directory(root / "train", task, class_map, split_seed);
    out.test = load_directory(root / "test", task, class_map, split_seed + 1);
    const auto parts = std::max(out.train.num_parts, out.test.num_parts);
    out.train.num_parts = out.test.num_parts = parts;
  } else {
    auto all = load_directory(root, task, class_map, split_seed);
    out = make_split(task, {}, all.num_parts, std::move(all.samples), 0.8, split_seed);
  }
  out.train.class_names = out.test.class_names = names;
  return out;
}

data::Dataset select_split(const DatasetSplit& split, const std::string& which) {
  if (which == "train") return split.train;
  if (which == "test") return split.test;
  require(which == "all", "split must be train, test or all, not '" + which + "'");
  data::Dataset all = split.train;
  all.samples.insert(all.samples.end(), split.test.samples.begin(), split.test.samples.end());
  return all;
}

}  // namespace psv::pipeline
