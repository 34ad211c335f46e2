#include "psv/task.hpp"

#include "psv/error.hpp"

namespace psv {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::classify: return "classify";
    case Task::segment: return "segment";
    case Task::complete: return "complete";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  if (name == "classify") return Task::classify;
  if (name == "segment") return Task::segment;
  if (name == "complete") return Task::complete;
  throw ValidationError("unknown task '" + std::string(name) + "' (expected classify, segment or complete)");
}

}  // namespace psv
