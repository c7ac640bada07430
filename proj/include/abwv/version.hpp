#pragma once

namespace abwv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace abwv
