#pragma once

namespace irisloc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace irisloc
