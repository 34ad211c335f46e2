#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "psv/error.hpp"
#include "psv/geometry.hpp"

namespace psv::geometry {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * norm(cross(b - a, c - a)); }

PointCloud sample_mesh_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    for (const auto v : f) require(v < mesh.vertices.size(), "mesh face index out of range");
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    cumulative.push_back(total);
  }
  require(total > 0.0, "cannot sample a mesh with zero surface area");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double target = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double s = std::sqrt(unit(rng));
    const double t = unit(rng);
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    out.points.push_back((1.0 - s) * a + (s * (1.0 - t)) * b + (s * t) * c);
  }
  return out;
}

namespace {

// Next line that is neither blank nor a comment.
bool next_content_line(std::istream& in, std::string& line, std::size_t& line_number) {
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

[[noreturn]] void off_error(const std::string& source, std::size_t line, const std::string& what) {
  throw ValidationError(source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

TriangleMesh parse_off(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_number = 0;
  if (!next_content_line(in, line, line_number) || line.rfind("OFF", 0) != 0)
    off_error(source_name, line_number, "missing OFF header");

  // Some ModelNet files glue the counts onto the header ("OFF490 518 0").
  std::string counts_text = line.substr(3);
  if (counts_text.find_first_not_of(" \t\r") == std::string::npos) {
    if (!next_content_line(in, counts_text, line_number)) off_error(source_name, line_number, "missing counts line");
  }
  std::istringstream counts(counts_text);
  long long vertex_count = -1;
  long long face_count = -1;
  if (!(counts >> vertex_count >> face_count) || vertex_count < 0 || face_count < 0)
    off_error(source_name, line_number, "malformed counts line");

  TriangleMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(vertex_count));
  for (long long v = 0; v < vertex_count; ++v) {
    if (!next_content_line(in, line, line_number)) off_error(source_name, line_number, "unexpected end of vertices");
    std::istringstream row(line);
    Vec3 p{};
    if (!(row >> p[0] >> p[1] >> p[2]) || !std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
      off_error(source_name, line_number, "malformed vertex");
    mesh.vertices.push_back(p);
  }
  for (long long f = 0; f < face_count; ++f) {
    if (!next_content_line(in, line, line_number)) off_error(source_name, line_number, "unexpected end of faces");
    std::istringstream row(line);
    long long arity = 0;
    if (!(row >> arity) || arity < 3) off_error(source_name, line_number, "malformed face");
    std::vector<std::uint32_t> idx(static_cast<std::size_t>(arity));
    for (auto& i : idx) {
      long long value = -1;
      if (!(row >> value) || value < 0 || value >= vertex_count)
        off_error(source_name, line_number, "face index out of range");
      i = static_cast<std::uint32_t>(value);
    }
    for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
  }
  return mesh;
}

TriangleMesh read_off(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open " + path.string());
  return parse_off(in, path.string());
}

}  // namespace psv::geometry
