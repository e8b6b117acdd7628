#pragma once

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace mobnp {

/// Shortest text that reads back to the same double; "NA" for NaN.
inline std::string format_double(double x) {
    if (std::isnan(x))
        return "NA";
    return fmt::format("{}", x);
}

} // namespace mobnp
