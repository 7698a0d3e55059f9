#pragma once

namespace condsub {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace condsub
