#pragma once

namespace isostat {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace isostat
