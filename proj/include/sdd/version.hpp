#pragma once

namespace sdd {
inline constexpr const char* kEngineVersion = "0.1.0";
}
