#pragma once

namespace escore {
inline constexpr const char* kToolVersion = "0.1.0";
}
