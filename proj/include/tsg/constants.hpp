#pragma once

namespace tsg {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr const char* kVersion = "0.1.0";

}  // namespace tsg
