#pragma once

namespace stochesp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stochesp
