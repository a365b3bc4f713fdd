#pragma once

namespace hypomhd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hypomhd
