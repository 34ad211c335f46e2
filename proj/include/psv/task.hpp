#pragma once

#include <string>
#include <string_view>

namespace psv {

enum class Task { classify, segment, complete };

std::string_view to_string(Task task);
/// Throws ValidationError for unknown names.
Task parse_task(std::string_view name);

}  // namespace psv
