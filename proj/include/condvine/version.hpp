#pragma once

namespace condvine {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace condvine
