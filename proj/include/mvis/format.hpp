#pragma once

#include <charconv>
#include <string>

namespace mvis {

/// Shortest decimal form that reads back to the same double.
inline std::string format_real(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

}  // namespace mvis
