#pragma once

namespace mqam {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace mqam
