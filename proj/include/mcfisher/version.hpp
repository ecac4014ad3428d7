#pragma once

namespace mcfisher {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mcfisher
