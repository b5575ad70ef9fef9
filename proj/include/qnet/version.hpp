#pragma once

namespace qnet {
inline constexpr const char* kVersion = "0.1.0";
}
