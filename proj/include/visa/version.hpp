#pragma once

namespace visa {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace visa
