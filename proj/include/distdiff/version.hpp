#pragma once

namespace distdiff {

inline constexpr const char* tool_version = "0.1.0";

}  // namespace distdiff
