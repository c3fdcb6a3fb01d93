#pragma once

namespace bindoa {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bindoa
