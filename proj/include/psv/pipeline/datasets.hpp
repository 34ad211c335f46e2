#pragma once

// Dataset sources named by URI:
//   toy://shapes5         classification, five procedural families
//   toy://cylinder_parts  segmentation, cylinder side vs caps
//   toy://completion2     completion, box and cylinder plane-cut pairs
// Toy URIs take optional query parameters, e.g. toy://shapes5?count=40&points=128&seed=3
// (count = clouds per family, points per cloud, generator seed).
// Anything else is a directory: per-class subdirectories, optionally under
// train/ and test/.

#include <cstdint>
#include <string>

#include "psv/data.hpp"

namespace psv::pipeline {

struct DatasetSplit {
  data::Dataset train;
  data::Dataset test;
};

/// Throws TaskMismatchError if a toy URI belongs to another task, and
/// ValidationError for unknown URIs or unreadable directories.
/// `split_seed` only affects directories without train/test subdirectories.
DatasetSplit open_dataset(const std::string& uri, Task task, std::uint64_t split_seed = 0);

/// Selects "train", "test" or "all" (both halves concatenated).
data::Dataset select_split(const DatasetSplit& split, const std::string& which);

}  // namespace psv::pipeline
