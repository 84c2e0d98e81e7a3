#pragma once

namespace osvtrace {

inline constexpr const char* kVersion = "0.1.0";

} // namespace osvtrace
