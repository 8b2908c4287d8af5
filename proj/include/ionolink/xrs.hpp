#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ionolink/errors.hpp"
#include "ionolink/timeutil.hpp"

namespace ionolink::xrs {

enum class Format { Auto, Ncei, Swpc };

/// Conditioned GOES XRS-B one-minute irradiance series. Timestamps are UTC
/// epoch seconds on exact minute boundaries, strictly increasing; minutes
/// missing from the feed stay missing (no resampling).
struct XrsSeries {
  std::vector<double> timestamps_utc;
  std::vector<double> flux_wm2;
  std::string source_tag = "synthetic";

  [[nodiscard]] std::size_t size() const { return timestamps_utc.size(); }

  void validate() const {
    require(timestamps_utc.size() == flux_wm2.size(), Errc::InvalidConfig,
            "timestamp/flux length mismatch");
    require(!timestamps_utc.empty(), Errc::EmptySeries, "empty XRS series");
    for (std::size_t i = 0; i < timestamps_utc.size(); ++i) {
      require(std::fmod(timestamps_utc[i], 60.0) == 0.0, Errc::GridMismatch,
              "timestamp not on a UTC minute boundary");
      require(flux_wm2[i] >= 0.0, Errc::InvalidConfig, "negative flux");
      if (i > 0)
        require(timestamps_utc[i] > timestamps_utc[i - 1], Errc::NonMonotonicTime,
                "timestamps not strictly increasing");
    }
  }
};

namespace internal {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim whitespace and quotes
    const auto is_junk = [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == '"'; };
    while (!cell.empty() && is_junk(cell.front())) cell.erase(cell.begin());
    while (!cell.empty() && is_junk(cell.back())) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline double parse_time_cell(const std::string& cell) {
  // canonical caches store raw epoch seconds; the archives store ISO strings
  if (!cell.empty() && (std::isdigit(static_cast<unsigned char>(cell[0])) || cell[0] == '-') &&
      cell.find('-') == std::string::npos && cell.find(':') == std::string::npos)
    return std::stod(cell);
  return timeutil::parse_utc_timestamp(cell);
}

/// Align to the minute boundary and drop duplicate minutes (first one wins).
inline void condition(std::vector<double>& t, std::vector<double>& f, const char* what) {
  std::vector<double> ct, cf;
  ct.reserve(t.size());
  cf.reserve(f.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double minute = std::floor(t[i] / 60.0) * 60.0;
    if (!ct.empty()) {
      if (minute == ct.back()) continue;  // duplicate minute: drop
      require(minute > ct.back(), Errc::NonMonotonicTime,
              std::string(what) + ": time goes backward after dedupe");
    }
    ct.push_back(minute);
    cf.push_back(f[i]);
  }
  t = std::move(ct);
  f = std::move(cf);
}

inline XrsSeries parse_ncei_csv(std::istream& in) {
  std::string line;
  // first non-blank line is the header
  do {
    require(static_cast<bool>(std::getline(in, line)), Errc::EmptySeries, "no header row");
  } while (line.find_first_not_of(" \t\r\n") == std::string::npos);

  const auto header = split_csv_line(line);
  long time_col = -1, flux_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string h = lower(header[i]);
    if (h == "time_tag" || h == "epoch_s") time_col = static_cast<long>(i);
    // prefer the long-band channel when both channels are present
    if (h == "xrsb_flux" || h == "flux_wm2") flux_col = static_cast<long>(i);
    if (flux_col < 0 && h == "flux") flux_col = static_cast<long>(i);
  }
  require(time_col >= 0 && flux_col >= 0, Errc::UnknownFormat,
          "header lacks time_tag/epoch_s or xrsb_flux/flux_wm2 columns");

  std::vector<double> t, f;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<long>(cells.size()) <= std::max(time_col, flux_col)) continue;
    const double flux = std::stod(cells[static_cast<std::size_t>(flux_col)]);
    if (!std::isfinite(flux) || flux < 0.0) continue;  // archive fill values
    t.push_back(parse_time_cell(cells[static_cast<std::size_t>(time_col)]));
    f.push_back(flux);
  }
  require(!t.empty(), Errc::EmptySeries, "no data rows");
  condition(t, f, "NCEI");
  XrsSeries s;
  s.timestamps_utc = std::move(t);
  s.flux_wm2 = std::move(f);
  s.source_tag = "NCEI";
  return s;
}

inline XrsSeries parse_swpc_json(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::UnknownFormat, std::string("SWPC JSON parse failed: ") + e.what());
  }
  require(doc.is_array(), Errc::UnknownFormat, "SWPC feed must be a JSON array");
  std::vector<double> t, f;
  for (const auto& rec : doc) {
    if (!rec.is_object() || !rec.contains("time_tag") || !rec.contains("flux")) continue;
    // long-wavelength B band only
    if (rec.contains("energy") && rec["energy"].get<std::string>() != "0.1-0.8nm") continue;
    const double flux = rec["flux"].get<double>();
    if (!std::isfinite(flux) || flux < 0.0) continue;
    t.push_back(timeutil::parse_utc_timestamp(rec["time_tag"].get<std::string>()));
    f.push_back(flux);
  }
  require(!t.empty(), Errc::EmptySeries, "no 0.1-0.8nm records in SWPC feed");
  condition(t, f, "SWPC");
  XrsSeries s;
  s.timestamps_utc = std::move(t);
  s.flux_wm2 = std::move(f);
  s.source_tag = "SWPC";
  return s;
}

}  // namespace internal

/// Parse one of the two official feed layouts (or a canonical cache file).
/// Auto-detection sniffs the first non-blank byte: '[' or '{' selects the
/// SWPC JSON layout, anything else the delimited NCEI layout.
inline XrsSeries parse_xrs_file(const std::string& path, Format hint = Format::Auto) {
  std::ifstream in(path);
  require(in.good(), Errc::UnknownFormat, "cannot open '" + path + "'");

  Format fmt = hint;
  if (fmt == Format::Auto) {
    char c = 0;
    while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {}
    require(in.good(), Errc::EmptySeries, "file '" + path + "' is empty");
    in.seekg(0);
    fmt = (c == '[' || c == '{') ? Format::Swpc : Format::Ncei;
  }
  XrsSeries s = fmt == Format::Swpc ? internal::parse_swpc_json(in) : internal::parse_ncei_csv(in);
  s.validate();
  return s;
}

/// Write the canonical two-column cache (epoch_s, flux_wm2). Full precision
/// so a parse -> serialize -> parse round trip is identical.
inline void serialize_xrs(const XrsSeries& series, const std::string& path) {
  series.validate();
  std::ofstream out(path);
  require(out.good(), Errc::InvalidConfig, "cannot write '" + path + "'");
  out << "epoch_s,flux_wm2\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", series.timestamps_utc[i],
                  series.flux_wm2[i]);
    out << buf;
  }
}

/// Detrend against a trailing rolling-minimum baseline over the previous
/// `baseline_window_min` minutes (current minute excluded, so a flare rise is
/// preserved until the window slides past it), clipped at zero from below.
inline std::vector<double> detrend_flux(const XrsSeries& series, std::size_t baseline_window_min) {
  series.validate();
  require(baseline_window_min >= 1, Errc::InvalidConfig, "baseline window must be >= 1 minute");
  require(baseline_window_min <= series.size(), Errc::WindowTooLong,
          "baseline window exceeds series length");

  std::vector<double> out(series.size());
  std::deque<std::size_t> window;  // monotone deque of candidate minimum indices
  for (std::size_t k = 0; k < series.size(); ++k) {
    while (!window.empty() && window.front() + baseline_window_min < k) window.pop_front();
    const double baseline = window.empty() ? series.flux_wm2[k] : series.flux_wm2[window.front()];
    out[k] = std::max(0.0, series.flux_wm2[k] - baseline);
    while (!window.empty() && series.flux_wm2[window.back()] >= series.flux_wm2[k])
      window.pop_back();
    window.push_back(k);
  }
  return out;
}

}  // namespace ionolink::xrs
