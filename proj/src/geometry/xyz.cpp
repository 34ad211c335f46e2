#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "psv/error.hpp"
#include "psv/geometry.hpp"

namespace psv::geometry {

PointCloud parse_xyz(std::istream& in, const std::string& source_name) {
  PointCloud cloud;
  std::string line;
  std::size_t line_number = 0;
  bool labelled = false;
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    const auto fail = [&](const std::string& what) {
      throw ValidationError(source_name + ":" + std::to_string(line_number) + ": " + what);
    };
    std::istringstream row(line);
    std::vector<std::string> fields;
    for (std::string f; row >> f;) fields.push_back(f);
    if (fields.size() != 3 && fields.size() != 4) fail("expected 3 or 4 columns, got " + std::to_string(fields.size()));
    if (cloud.points.empty()) labelled = fields.size() == 4;
    if (labelled != (fields.size() == 4)) fail("inconsistent label column");

    Vec3 p{};
    for (int k = 0; k < 3; ++k) {
      std::size_t used = 0;
      try {
        p[k] = std::stod(fields[k], &used);
      } catch (const std::exception&) {
        fail("not a number: '" + fields[k] + "'");
      }
      if (used != fields[k].size() || !std::isfinite(p[k])) fail("not a finite number: '" + fields[k] + "'");
    }
    cloud.points.push_back(p);
    if (labelled) {
      std::size_t used = 0;
      int label = 0;
      try {
        label = std::stoi(fields[3], &used);
      } catch (const std::exception&) {
        fail("label is not an integer: '" + fields[3] + "'");
      }
      if (used != fields[3].size() || label < 0) fail("label is not a non-negative integer: '" + fields[3] + "'");
      cloud.labels.push_back(label);
    }
  }
  return cloud;
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  return parse_xyz(in, path.string());
}

void write_xyz(std::ostream& out, const PointCloud& cloud) {
  out << std::setprecision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p[0] << ' ' << p[1] << ' ' << p[2];
    if (cloud.has_labels()) out << ' ' << cloud.labels[i];
    out << '\n';
  }
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  require(static_cast<bool>(out), "cannot write " + path.string());
  write_xyz(out, cloud);
  require(static_cast<bool>(out), "failed writing " + path.string());
}

}  // namespace psv::geometry
