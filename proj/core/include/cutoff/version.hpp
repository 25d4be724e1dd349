#pragma once

namespace cutoff {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cutoff
