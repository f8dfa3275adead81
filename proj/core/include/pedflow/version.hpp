#pragma once

namespace pedflow {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pedflow
