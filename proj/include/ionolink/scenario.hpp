#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ionolink/errors.hpp"
#include "ionolink/geometry.hpp"
#include "ionolink/rng.hpp"
#include "ionolink/timeutil.hpp"
#include "ionolink/xrs.hpp"

namespace ionolink::synth {

inline constexpr double kXrsStepS = 60.0;  // native XRS cadence

/// Slow-bias random walk densities; matches the estimator's (b, b_dot) model
/// so truth and filter share one description of the nuisance states.
struct BiasDriftConfig {
  bool enabled = true;
  double q3 = 4.0e-14;   // rad^2/s
  double q4 = 2.5e-15;   // (rad/s)^2/s
};

enum class ChiMode { Constant, Computed };

/// Scenario description: geometry, sampling, the XRS->dVTEC response
/// parameters and the observable's noise/bias model.
struct ScenarioConfig {
  geo::GeometryConfig geometry{};
  double cn0_dbhz = 52.0;
  double dt_s = 0.1;
  double duration_s = 3600.0;
  double amplitude_scale = 1.0;   // multiplies the drive response linearly
  double tau_d_s = 600.0;         // relaxation constant
  double alpha0 = 80.0;           // TECU per (W s / m^2) of detrended drive
  double gamma_exp = 0.5;         // zenith exponent
  ChiMode chi_mode = ChiMode::Constant;
  double chi_rad = 0.35;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  BiasDriftConfig bias_drift{};
  bool thermal_noise = true;
  std::uint64_t rng_seed = 1;
  double t0_s = 900.0;            // event onset time within the trace
  double vtec0_tecu = 12.0;       // nominal background column (context only)

  void validate() const {
    geometry.validate();
    require(dt_s > 0.0, Errc::InvalidConfig, "dt_s must be > 0");
    require(cn0_dbhz >= 40.0 && cn0_dbhz <= 70.0, Errc::InvalidConfig,
            "cn0_dbhz outside the supported [40, 70] range");
    require(tau_d_s > 0.0, Errc::InvalidConfig, "tau_d_s must be > 0");
    require(amplitude_scale > 0.0, Errc::InvalidConfig, "amplitude_scale must be > 0");
    require(duration_s > 0.0, Errc::InvalidConfig, "duration_s must be > 0");
    require(std::abs(lat_deg) <= 90.0 && std::abs(lon_deg) <= 180.0, Errc::InvalidConfig,
            "receiver coordinates out of range");
  }

  [[nodiscard]] double cn0_linear() const { return std::pow(10.0, cn0_dbhz / 10.0); }
  [[nodiscard]] double noise_variance() const {
    return thermal_noise ? 1.0 / (cn0_linear() * dt_s) : 0.0;
  }
};

/// One 0.1 s tick of the synthesized link.
struct EpochSample {
  double t_s = 0.0;
  double y_rad = 0.0;
  double truth_dvtec_tecu = 0.0;
  double truth_bias_rad = 0.0;
};

/// Values on a dense 60 s grid starting at t0_s.
struct MinuteSeries {
  double t0_s = 0.0;
  std::vector<double> values;
  std::size_t gap_minutes = 0;  // minutes absent from the source feed, treated as zero drive
};

/// Expand (timestamps, values) onto the dense 60 s grid spanning the series.
/// Minutes missing from the feed are filled with zero and counted so callers
/// can log a warning.
inline MinuteSeries to_minute_grid(const std::vector<double>& timestamps,
                                   const std::vector<double>& values) {
  require(timestamps.size() == values.size(), Errc::GridMismatch,
          "timestamp/value length mismatch");
  require(!timestamps.empty(), Errc::EmptySeries, "empty series");
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    require(std::fmod(timestamps[i], kXrsStepS) == 0.0, Errc::GridMismatch,
            "sample not on the 60 s grid");
    if (i > 0)
      require(timestamps[i] > timestamps[i - 1], Errc::NonMonotonicTime,
              "timestamps not strictly increasing");
  }
  MinuteSeries out;
  out.t0_s = timestamps.front();
  const auto n = static_cast<std::size_t>(
                     std::llround((timestamps.back() - timestamps.front()) / kXrsStepS)) +
                 1;
  out.values.assign(n, 0.0);
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    const auto k = static_cast<std::size_t>(
        std::llround((timestamps[i] - timestamps.front()) / kXrsStepS));
    out.values[k] = values[i];
  }
  out.gap_minutes = n - timestamps.size();
  return out;
}

/// Low-accuracy solar zenith angle (sine-declination, mean-sun hour angle);
/// adequate for the cos^gamma(chi) daylight weighting of the drive term.
inline double solar_zenith(double t_utc_s, double lat_deg, double lon_deg) {
  require(std::abs(lat_deg) <= 90.0 && std::abs(lon_deg) <= 180.0, Errc::InvalidConfig,
          "receiver coordinates out of range");
  const int doy = timeutil::day_of_year(t_utc_s);
  const double decl = geo::deg2rad(-23.44) *
                      std::cos(2.0 * std::numbers::pi * (static_cast<double>(doy) + 10.0) / 365.0);
  const double solar_hours = timeutil::seconds_of_day(t_utc_s) / 3600.0 + lon_deg / 15.0;
  const double hour_angle = geo::deg2rad((solar_hours - 12.0) * 15.0);
  const double lat = geo::deg2rad(lat_deg);
  const double cos_chi = std::sin(lat) * std::sin(decl) +
                         std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
  return std::acos(std::clamp(cos_chi, -1.0, 1.0));
}

namespace internal {

inline double chi_weight(const ScenarioConfig& cfg, double t_utc_s) {
  const double chi = cfg.chi_mode == ChiMode::Constant
                         ? cfg.chi_rad
                         : solar_zenith(t_utc_s, cfg.lat_deg, cfg.lon_deg);
  const double c = std::cos(chi);
  return c > 0.0 ? std::pow(c, cfg.gamma_exp) : 0.0;  // no photoionization drive at night
}

}  // namespace internal

/// Causal driven-relaxation response on the native 60 s grid:
/// dVTEC_k = exp(-60/tau_d) dVTEC_{k-1} + A alpha0 cos^gamma(chi_k) dF_k 60.
inline MinuteSeries xrs_to_dvtec(const std::vector<double>& timestamps,
                                 const std::vector<double>& dfx_wm2,
                                 const ScenarioConfig& cfg) {
  cfg.validate();
  for (double v : dfx_wm2)
    require(v >= 0.0, Errc::InvalidConfig, "detrended drive must be non-negative");
  MinuteSeries grid = to_minute_grid(timestamps, dfx_wm2);
  const double decay = std::exp(-kXrsStepS / cfg.tau_d_s);
  double state = 0.0;
  for (std::size_t k = 0; k < grid.values.size(); ++k) {
    const double t_abs = grid.t0_s + static_cast<double>(k) * kXrsStepS;
    state = decay * state + cfg.amplitude_scale * cfg.alpha0 *
                                internal::chi_weight(cfg, t_abs) * grid.values[k] * kXrsStepS;
    grid.values[k] = state;
  }
  return grid;
}

/// Locate the drive onset: first minute whose detrended flux reaches
/// `frac` of the series peak. Returns the offset in seconds from the series
/// start, or nullopt for an all-zero drive.
inline std::optional<double> drive_onset_offset(const MinuteSeries& dfx, double frac = 0.1) {
  double peak = 0.0;
  for (double v : dfx.values) peak = std::max(peak, v);
  if (peak <= 0.0) return std::nullopt;
  for (std::size_t k = 0; k < dfx.values.size(); ++k)
    if (dfx.values[k] >= frac * peak) return static_cast<double>(k) * kXrsStepS;
  return std::nullopt;
}

/// Synthesize the 10 Hz dual-carrier GF observable from a minute-grid dVTEC
/// series. The series is placed so that `onset_offset_s` into it lands at
/// trace time cfg.t0_s; dVTEC is linearly interpolated between minute samples
/// and taken as zero outside the series span (the response has decayed into
/// the noise floor by construction of the scenario durations).
inline std::vector<EpochSample> synthesize_trace(const MinuteSeries& dvtec,
                                                 const ScenarioConfig& cfg,
                                                 double onset_offset_s = 0.0) {
  cfg.validate();
  const double k_eff = geo::effective_gain(cfg.geometry);
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s / cfg.dt_s));
  std::vector<EpochSample> trace(n);
  Rng rng(cfg.rng_seed);

  const auto dvtec_at = [&](double trace_t) -> double {
    if (dvtec.values.empty()) return 0.0;
    const double series_t = trace_t - cfg.t0_s + onset_offset_s;  // seconds into the series
    const double idx = series_t / kXrsStepS;
    if (idx < 0.0) return 0.0;
    const double last = static_cast<double>(dvtec.values.size() - 1);
    if (idx >= last)  // past the series: unforced relaxation
      return dvtec.values.back() * std::exp(-(series_t - last * kXrsStepS) / cfg.tau_d_s);
    const auto lo = static_cast<std::size_t>(idx);
    const double w = idx - static_cast<double>(lo);
    return (1.0 - w) * dvtec.values[lo] + w * dvtec.values[lo + 1];
  };

  double bias = 0.0;
  double bias_rate = 0.0;
  const double noise_std = std::sqrt(cfg.noise_variance());
  const double q3_std = cfg.bias_drift.enabled ? std::sqrt(cfg.bias_drift.q3 * cfg.dt_s) : 0.0;
  const double q4_std = cfg.bias_drift.enabled ? std::sqrt(cfg.bias_drift.q4 * cfg.dt_s) : 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.dt_s;
    bias += cfg.dt_s * bias_rate + q3_std * rng.gaussian();
    bias_rate += q4_std * rng.gaussian();
    EpochSample& s = trace[k];
    s.t_s = t;
    s.truth_dvtec_tecu = dvtec_at(t);
    s.truth_bias_rad = bias;
    s.y_rad = k_eff * s.truth_dvtec_tecu + bias + noise_std * rng.gaussian();
  }
  return trace;
}

/// Indices where the per-sample GF increment reaches the cycle-slip guard
/// |y[k] - y[k-1]| >= pi/2 (assumption A5 monitor).
inline std::vector<std::size_t> check_cycle_slip(const std::vector<EpochSample>& trace) {
  require(!trace.empty(), Errc::EmptySeries, "empty trace");
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k < trace.size(); ++k)
    if (std::abs(trace[k].y_rad - trace[k - 1].y_rad) >= std::numbers::pi / 2.0)
      out.push_back(k);
  return out;
}

/// Synthetic flare profile used when no archive file drives a scenario:
/// background plus a fast-rise/exponential-decay bump, emitted on the native
/// one-minute grid so it flows through the same ingest path as real feeds.
struct SyntheticFlare {
  double peak_wm2 = 1.0e-4;        // X1-class peak irradiance
  double background_wm2 = 1.0e-7;  // quiet-sun B1 level
  double onset_min = 10.0;
  double rise_min = 3.0;
  double decay_min = 20.0;
  double duration_min = 120.0;
  double start_epoch_s = 1504699200.0;  // an arbitrary UTC anchor minute
};

inline xrs::XrsSeries synthesize_xrs(const SyntheticFlare& flare) {
  require(flare.peak_wm2 > flare.background_wm2, Errc::InvalidConfig,
          "flare peak must exceed background");
  require(flare.rise_min > 0.0 && flare.decay_min > 0.0, Errc::InvalidConfig,
          "flare rise/decay must be positive");
  xrs::XrsSeries s;
  const auto n = static_cast<std::size_t>(flare.duration_min);
  for (std::size_t k = 0; k < n; ++k) {
    const double m = static_cast<double>(k);
    double flux = flare.background_wm2;
    if (m >= flare.onset_min) {
      const double dt = m - flare.onset_min;
      const double shape = (1.0 - std::exp(-dt / flare.rise_min)) * std::exp(-dt / flare.decay_min);
      // normalize so the profile peak hits peak_wm2
      const double t_star = flare.rise_min * std::log(1.0 + flare.decay_min / flare.rise_min);
      const double peak_shape = (1.0 - std::exp(-t_star / flare.rise_min)) *
                                std::exp(-t_star / flare.decay_min);
      flux += (flare.peak_wm2 - flare.background_wm2) * shape / peak_shape;
    }
    s.timestamps_utc.push_back(flare.start_epoch_s + 60.0 * m);
    s.flux_wm2.push_back(flux);
  }
  s.source_tag = "synthetic";
  s.validate();
  return s;
}

}  // namespace ionolink::synth
