#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "ionolink/errors.hpp"

namespace ionolink::timeutil {

/// Days since 1970-01-01 for a proleptic Gregorian civil date.
constexpr std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
  int year;
  unsigned month;
  unsigned day;
};

constexpr CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), m, d};
}

/// 1-based day of year for an epoch-second instant (UTC).
inline int day_of_year(double epoch_s) {
  const std::int64_t days = static_cast<std::int64_t>(std::floor(epoch_s / 86400.0));
  const CivilDate cd = civil_from_days(days);
  return static_cast<int>(days - days_from_civil(cd.year, 1, 1)) + 1;
}

inline double seconds_of_day(double epoch_s) {
  const double d = std::floor(epoch_s / 86400.0);
  return epoch_s - d * 86400.0;
}

/// Parse "YYYY-MM-DDTHH:MM:SSZ" or "YYYY-MM-DD HH:MM:SS" (optional fractional
/// seconds, optional trailing 'Z') into UTC epoch seconds.
inline double parse_utc_timestamp(std::string_view s) {
  // trim
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mi = 0;
  double sec = 0.0;
  char sep = 0;
  const std::string buf(s);
  const int n = std::sscanf(buf.c_str(), "%d-%u-%u%c%u:%u:%lf", &y, &mo, &d, &sep, &hh, &mi, &sec);
  require(n == 7 && (sep == 'T' || sep == ' ') && mo >= 1 && mo <= 12 && d >= 1 && d <= 31 &&
              hh < 24 && mi < 60 && sec >= 0.0 && sec < 61.0,
          Errc::UnknownFormat, "bad UTC timestamp '" + buf + "'");
  return static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + hh * 3600.0 + mi * 60.0 + sec;
}

inline std::string format_utc(double epoch_s) {
  const std::int64_t days = static_cast<std::int64_t>(std::floor(epoch_s / 86400.0));
  const CivilDate cd = civil_from_days(days);
  const double sod = epoch_s - static_cast<double>(days) * 86400.0;
  const int hh = static_cast<int>(sod / 3600.0);
  const int mi = static_cast<int>((sod - hh * 3600.0) / 60.0);
  const int ss = static_cast<int>(sod - hh * 3600.0 - mi * 60.0);
  char out[32];
  std::snprintf(out, sizeof(out), "%04d-%02u-%02uT%02d:%02d:%02dZ", cd.year, cd.month, cd.day, hh,
                mi, ss);
  return out;
}

}  // namespace ionolink::timeutil
