#pragma once

namespace s2b {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace s2b
