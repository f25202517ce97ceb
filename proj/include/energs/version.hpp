#pragma once

namespace energs {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace energs
