#pragma once

namespace ga {

inline constexpr const char* kVersion = "0.1.0";

} // namespace ga
