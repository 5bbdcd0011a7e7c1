#pragma once

namespace evcal {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace evcal
