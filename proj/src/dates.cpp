#include "deeprec/dates.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace deeprec {

namespace {

bool parse_int(std::string_view text, int& out) {
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

}  // namespace

std::optional<DayNumber> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!all_digits(text.substr(0, 4)) || !all_digits(text.substr(5, 2)) ||
      !all_digits(text.substr(8, 2))) {
    return std::nullopt;
  }
  parse_int(text.substr(0, 4), y);
  parse_int(text.substr(5, 2), m);
  parse_int(text.substr(8, 2), d);
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  if (text.empty()) return std::nullopt;
  const bool negative = text.front() == '-';
  if (all_digits(negative ? text.substr(1) : text)) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
  }
  if (text.size() < 10) return std::nullopt;
  const auto day = parse_date(text.substr(0, 10));
  if (!day) return std::nullopt;
  std::int64_t seconds = *day * 86400;
  std::string_view rest = text.substr(10);
  if (rest.empty()) return seconds;
  if (rest.front() != 'T' && rest.front() != ' ') return std::nullopt;
  rest.remove_prefix(1);
  if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
  int hh = 0, mm = 0, ss = 0;
  if (rest.size() != 5 && rest.size() != 8) return std::nullopt;
  if (rest[2] != ':' || !parse_int(rest.substr(0, 2), hh) || !parse_int(rest.substr(3, 2), mm)) {
    return std::nullopt;
  }
  if (rest.size() == 8 && (rest[5] != ':' || !parse_int(rest.substr(6, 2), ss))) return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 60 || hh < 0 || mm < 0 || ss < 0) return std::nullopt;
  return seconds + hh * 3600 + mm * 60 + ss;
}

DayNumber day_of(std::int64_t epoch_seconds) {
  // floor division so pre-1970 timestamps land on the right day
  DayNumber d = epoch_seconds / 86400;
  if (epoch_seconds % 86400 < 0) --d;
  return d;
}

std::string format_date(DayNumber day) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buffer;
}

}  // namespace deeprec
