#pragma once

namespace spintrack {
inline constexpr const char* kVersion = "0.3.0";
}
