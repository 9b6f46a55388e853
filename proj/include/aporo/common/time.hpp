#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace aporo {

using Timestamp = std::chrono::sys_seconds;

/// Parses ISO-8601 UTC instants: "2022-09-01T12:00:00Z", optional fractional
/// seconds, and "+HH:MM"/"-HH:MM" offsets. Also accepts a bare "YYYY-MM-DD".
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp ts);

}  // namespace aporo
