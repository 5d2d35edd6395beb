#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace deeprec {

/// Days since 1970-01-01 (UTC).
using DayNumber = std::int64_t;

/// Epoch seconds from either an integer ("1125878400") or an ISO date with an
/// optional time part ("2005-09-05", "2005-09-05 13:04:00", "2005-09-05T13:04:00Z").
std::optional<std::int64_t> parse_timestamp(std::string_view text);

/// Day number of an ISO date "YYYY-MM-DD".
std::optional<DayNumber> parse_date(std::string_view text);

DayNumber day_of(std::int64_t epoch_seconds);

std::string format_date(DayNumber day);

}  // namespace deeprec
