#pragma once

namespace cbpsim {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cbpsim
