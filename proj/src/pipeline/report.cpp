#include "psv/pipeline/report.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>

#include "psv/error.hpp"

namespace psv::pipeline {

namespace {

std::vector<std::string> fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_number(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(!s.empty() && end == s.c_str() + s.size(), where + "expected a number, got '" + s + "'");
  return v;
}

}  // namespace

std::vector<Curve> curves_from_csv(std::string_view text, const std::string& source) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    const auto newline = text.find('\n', start);
    auto line = text.substr(start, newline == std::string_view::npos ? newline : newline - start);
    start = newline == std::string_view::npos ? text.size() : newline + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    rows.push_back(fields(line));
    line_numbers.push_back(line_no);
  }
  require(!rows.empty(), source + ": empty CSV");
  const auto& header = rows.front();
  const auto where = [&](std::size_t r) { return source + ":" + std::to_string(line_numbers[r]) + ": "; };
  for (std::size_t r = 1; r < rows.size(); ++r)
    require(rows[r].size() == header.size(), where(r) + "expected " + std::to_string(header.size()) + " fields, got " +
                                                 std::to_string(rows[r].size()));

  std::vector<Curve> curves;
  if (header.size() == 3 && header[0] == "votes" && header[1] == "aggregation") {
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      to_number(rows[r][0], where(r));
      const auto [it, fresh] = index.try_emplace(rows[r][1], curves.size());
      if (fresh) curves.push_back({rows[r][1], {}});
      curves[it->second].points.emplace_back(rows[r][0], to_number(rows[r][2], where(r)));
    }
  } else if (header.size() == 2 && header[0] == "epoch" && header[1] == "loss") {
    curves.push_back({"loss", {}});
    for (std::size_t r = 1; r < rows.size(); ++r) {
      to_number(rows[r][0], where(r));
      curves.back().points.emplace_back(rows[r][0], to_number(rows[r][1], where(r)));
    }
  } else if (header.size() >= 3 && header[0] == "class" && header[1] == "count") {
    for (std::size_t c = 2; c < header.size(); ++c) curves.push_back({header[c], {}});
    for (std::size_t r = 1; r < rows.size(); ++r) {
      to_number(rows[r][1], where(r));
      for (std::size_t c = 2; c < header.size(); ++c)
        curves[c - 2].points.emplace_back(rows[r][0], to_number(rows[r][c], where(r)));
    }
  } else {
    throw ValidationError(source + ":" + std::to_string(line_numbers.front()) + ": unrecognized CSV header");
  }
  return curves;
}

std::vector<std::filesystem::path> write_curves(const std::filesystem::path& dir, const std::string& prefix,
                                                const std::vector<Curve>& curves) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& curve : curves) {
    const auto path = dir / (prefix + "_" + curve.name + ".dat");
    std::ofstream out(path);
    require(static_cast<bool>(out), "cannot write " + path.string());
    out << "# " << curve.name << '\n' << std::setprecision(10);
    for (const auto& [x, y] : curve.points) out << x << ' ' << y << '\n';
    written.push_back(path);
  }
  return written;
}

}  // namespace psv::pipeline
