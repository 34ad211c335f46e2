#pragma once

// Turns metric, sweep and loss CSV files into plot-ready two-column curves.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace psv::pipeline {

struct Curve {
  std::string name;
  /// (x label, y) in file order.
  std::vector<std::pair<std::string, double>> points;
};

/// Recognized layouts:
///   votes,aggregation,<metric>   one curve per aggregation, x = votes
///   epoch,loss                   one curve "loss"
///   class,count,<m1>,<m2>...     one curve per metric column, x = class
/// Throws ValidationError naming `source` and the line for ragged rows,
/// non-numeric values or an unknown header.
std::vector<Curve> curves_from_csv(std::string_view text, const std::string& source);

/// Writes "<dir>/<prefix>_<curve>.dat" with "x y" lines; returns the paths.
std::vector<std::filesystem::path> write_curves(const std::filesystem::path& dir, const std::string& prefix,
                                                const std::vector<Curve>& curves);

}  // namespace psv::pipeline
