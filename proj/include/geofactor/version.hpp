#pragma once

namespace geofactor {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace geofactor
