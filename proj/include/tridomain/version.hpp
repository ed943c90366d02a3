#pragma once

namespace tridomain {
inline constexpr const char* kVersion = "0.1.0";
}
