#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "evscore/detail/text.hpp"
#include "evscore/error.hpp"

namespace evscore {

// Timezone-naive wall-clock instant with millisecond resolution.
//
// Wire format: "YYYY-MM-DD hh:mm:ss" with an optional ".f", ".ff" or ".fff"
// fraction. Fractions shorter than three digits are right-padded with zeros
// (".9" means 900 ms); four or more digits are rejected rather than
// truncated. Values order and compare as opaque labels; no timezone
// arithmetic is ever applied.
struct Timestamp {
  std::int64_t ms_since_epoch = 0;  // relative to 1970-01-01 00:00:00.000, naive

  auto operator<=>(const Timestamp&) const = default;
};

namespace detail {

// Days from 1970-01-01 for a civil date (Gregorian, proleptic).
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

inline bool is_leap(std::int64_t y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

inline unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr std::array<unsigned, 12> k = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : k[m - 1];
}

inline unsigned parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, const char* what) {
  unsigned v = 0;
  for (std::size_t i = 0; i < len; ++i) {
    char c = s[pos + i];
    if (!is_ascii_digit(c)) throw Error(Errc::bad_timestamp, std::string("non-digit in ") + what);
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  return v;
}

}  // namespace detail

inline Timestamp parse_timestamp(std::string_view text) {
  // Fixed layout: positions 4, 7 are '-', 10 is ' ', 13 and 16 are ':'.
  if (text.size() < 19) throw Error(Errc::bad_timestamp, "too short: '" + std::string(text) + "'");
  if (text[4] != '-' || text[7] != '-' || text[10] != ' ' || text[13] != ':' || text[16] != ':')
    throw Error(Errc::bad_timestamp, "bad separators: '" + std::string(text) + "'");

  const std::int64_t year = detail::parse_fixed_uint(text, 0, 4, "year");
  const unsigned month = detail::parse_fixed_uint(text, 5, 2, "month");
  const unsigned day = detail::parse_fixed_uint(text, 8, 2, "day");
  const unsigned hour = detail::parse_fixed_uint(text, 11, 2, "hour");
  const unsigned minute = detail::parse_fixed_uint(text, 14, 2, "minute");
  const unsigned second = detail::parse_fixed_uint(text, 17, 2, "second");

  unsigned millis = 0;
  if (text.size() > 19) {
    if (text[19] != '.') throw Error(Errc::bad_timestamp, "bad fraction separator");
    const std::size_t digits = text.size() - 20;
    if (digits == 0) throw Error(Errc::bad_timestamp, "empty fraction");
    if (digits > 3) throw Error(Errc::bad_timestamp, "sub-millisecond precision rejected");
    millis = detail::parse_fixed_uint(text, 20, digits, "fraction");
    for (std::size_t i = digits; i < 3; ++i) millis *= 10;  // right-pad to milliseconds
  }

  if (month < 1 || month > 12) throw Error(Errc::bad_timestamp, "month out of range");
  if (day < 1 || day > detail::days_in_month(year, month)) throw Error(Errc::bad_timestamp, "day out of range");
  if (hour > 23 || minute > 59 || second > 59) throw Error(Errc::bad_timestamp, "time out of range");

  const std::int64_t days = detail::days_from_civil(year, month, day);
  return Timestamp{((days * 24 + hour) * 60 + minute) * 60000 + second * 1000 + millis};
}

// Canonical form, always with a 3-digit fraction.
inline std::string format_timestamp(Timestamp ts) {
  std::int64_t ms = ts.ms_since_epoch;
  std::int64_t days = ms / 86400000;
  std::int64_t rem = ms % 86400000;
  if (rem < 0) {
    rem += 86400000;
    days -= 1;
  }
  std::int64_t year;
  unsigned month, day;
  detail::civil_from_days(days, year, month, day);
  const unsigned millis = static_cast<unsigned>(rem % 1000);
  const unsigned second = static_cast<unsigned>(rem / 1000 % 60);
  const unsigned minute = static_cast<unsigned>(rem / 60000 % 60);
  const unsigned hour = static_cast<unsigned>(rem / 3600000);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02u:%02u:%02u.%03u",
                static_cast<long long>(year), month, day, hour, minute, second, millis);
  return std::string(buf);
}

}  // namespace evscore
