#pragma once

#include <string>

#include <fmt/format.h>

namespace mft {

/// Round-trip safe decimal form used in every CSV.
inline std::string format_real(double v) { return fmt::format("{:.17g}", v); }

}  // namespace mft
