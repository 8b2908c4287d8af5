#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ionolink/bundle.hpp"
#include "ionolink/detect.hpp"
#include "ionolink/errors.hpp"
#include "ionolink/estimator.hpp"
#include "ionolink/geometry.hpp"
#include "ionolink/policy.hpp"
#include "ionolink/risk.hpp"
#include "ionolink/scenario.hpp"

namespace ionolink::pipeline {

/// One per-epoch log row. The *_h fields are carried in memory for
/// calibration but are not CSV columns.
struct EpochLog {
  double t_s = 0.0;
  double y_rad = 0.0;
  double z_norm = 0.0;
  int detected = 0;
  double dvtec_hat = 0.0;
  double dvtec_rate_hat = 0.0;
  double bias_hat = 0.0;
  double p11 = 0.0;
  double nis = 0.0;
  double m_req_db = 0.0;
  double m_avail_db = 0.0;
  double m_eff_db = 0.0;
  double p_out = 0.0;
  int mcs_index = 0;
  double r_bpshz = 0.0;
  double eta = 0.0;
  double bler = 0.0;
  double goodput_bpshz = 0.0;
  double mu_req_h_db = 0.0;     // not serialized
  double sigma_req_h_db = 0.0;  // not serialized
};

inline constexpr const char* kLogHeader =
    "t_s,y_rad,z_norm,detected,dvtec_hat,dvtec_rate_hat,bias_hat,p11,nis,"
    "m_req_db,m_avail_db,m_eff_db,p_out,mcs_index,r_bpshz,eta,bler,goodput_bpshz";

struct RuntimeStats {
  double mean_us = 0.0;
  double median_us = 0.0;
  double max_us = 0.0;
  std::size_t epochs = 0;
};

/// The full 10 Hz loop for one policy over one trace: front end, detector,
/// filter, risk forecast, discrete control and scoring. The estimator
/// consumes the raw pre-HPF observable; the detection branch alone sees the
/// high-passed signal.
class ReplayEngine {
 public:
  ReplayEngine(const bundle::CalibrationBundle& bundle, const synth::ScenarioConfig& scenario,
               policy::ControlConfig control, const kf::NoiseConfig& noise_base,
               policy::PolicyId policy_id)
      : bundle_(bundle),
        control_(configure_control(control, bundle)),
        k_eff_(geo::effective_gain(scenario.geometry)),
        dt_s_(scenario.dt_s),
        hpf_(bundle.detector.tau_hp_s, scenario.dt_s),
        mf_(detect::build_template(bundle.detector.window_s, scenario.dt_s,
                                   bundle.detector.template_rise_s,
                                   bundle.detector.template_decay_s)),
        latch_(bundle.record.threshold, bundle.record.threshold - bundle.detector.hysteresis_gap()),
        state_(kf::kf_init()),
        runtime_(policy_id, control_, bundle.ladder, bundle.margin, bundle.anchor, scenario.dt_s) {
    bundle.require_frozen();
    noise_ = noise_base;
    noise_.r_var = kf::NoiseConfig::measurement_variance(scenario.cn0_dbhz, scenario.dt_s);
    slope_lag_ = static_cast<std::size_t>(std::max(1.0, std::round(control_.slope_window_s / dt_s_)));
    // At-rest acquisition prior: the replay starts on a quiet link, so the
    // rate states get priors on the scale of their own process walks. The
    // loose kf_init rate defaults would let the unobservable rate split
    // (K_eff * dVTEC_rate vs bias rate) integrate into the level variance
    // and smear the outage forecast over long traces.
    state_.p[1][1] = 1e-6;   // (1e-3 TECU/s)^2
    state_.p[3][3] = 1e-12;  // (1e-6 rad/s)^2
  }

  EpochLog step(const synth::EpochSample& sample) {
    const auto tic = std::chrono::steady_clock::now();

    // detection branch (high-passed)
    const double u = hpf_.step(sample.y_rad);
    const double u_diff = std::abs(u - u_prev_);
    u_prev_ = u;
    const double z = mf_.step(u) / bundle_.record.sigma_pre;
    z_hist_.push_back(z);
    if (z_hist_.size() > slope_lag_ + 1) z_hist_.pop_front();
    const double z_slope =
        z_hist_.size() > 1 ? (z_hist_.back() - z_hist_.front()) / control_.slope_window_s : 0.0;
    const bool detected = latch_.step(z);

    // estimation branch (pre-HPF observable)
    state_ = kf::kf_step(state_, sample.y_rad, dt_s_, k_eff_, noise_);
    const double m_req_now = policy::required_margin_now(state_, k_eff_, bundle_.margin);

    // risk forecast at the horizon
    const auto horizon = kf::propagate_horizon(state_, control_.horizon_s, noise_);
    const auto forecast = risk::required_margin_forecast(
        horizon.mu1_tecu, horizon.mu2_tecu_s, horizon.p_xixi, k_eff_, horizon.p_xixi[0][0],
        bundle_.margin);

    // shared pilot fraction
    const double eta = control_.eta_mode == policy::EtaMode::Fixed
                           ? control_.eta0
                           : policy::pilot_fraction(m_req_now, control_);

    // discrete control
    policy::PolicyInputs in;
    in.t_s = sample.t_s;
    in.z_norm = z;
    in.z_slope = z_slope;
    in.detected = detected;
    in.m_req_now_db = m_req_now;
    in.mu_req_h_db = forecast.mu_req_db;
    in.sigma_req_h_db = forecast.sigma_req_db;
    in.u_abs_diff = u_diff;
    in.eta = eta;
    const auto decision = runtime_.step(in);

    // scoring with the frozen anchor
    const double m_avail = phy::available_extra_margin(decision.r_bpshz, bundle_.ladder);
    const double m_eff = phy::effective_margin(m_avail, m_req_now);
    const double scored_margin = m_eff + (decision.softened ? control_.delta_m_db : 0.0);
    const double bler_val = phy::bler(scored_margin, bundle_.anchor);
    const double goodput_val = phy::goodput(decision.eta, bler_val, decision.r_bpshz);

    const auto toc = std::chrono::steady_clock::now();
    epoch_costs_us_.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(toc - tic).count() / 1000.0);

    EpochLog row;
    row.t_s = sample.t_s;
    row.y_rad = sample.y_rad;
    row.z_norm = z;
    row.detected = detected ? 1 : 0;
    row.dvtec_hat = state_.x_hat[0];
    row.dvtec_rate_hat = state_.x_hat[1];
    row.bias_hat = state_.x_hat[2];
    row.p11 = state_.p[0][0];
    row.nis = state_.last_nis;
    row.m_req_db = m_req_now;
    row.m_avail_db = m_avail;
    row.m_eff_db = m_eff;
    row.p_out = decision.p_out;
    row.mcs_index = decision.mcs_index;
    row.r_bpshz = decision.r_bpshz;
    row.eta = decision.eta;
    row.bler = bler_val;
    row.goodput_bpshz = goodput_val;
    row.mu_req_h_db = forecast.mu_req_db;
    row.sigma_req_h_db = forecast.sigma_req_db;
    return row;
  }

  [[nodiscard]] RuntimeStats runtime_stats() const {
    RuntimeStats out;
    out.epochs = epoch_costs_us_.size();
    if (epoch_costs_us_.empty()) return out;
    std::vector<double> sorted = epoch_costs_us_;
    std::sort(sorted.begin(), sorted.end());
    out.median_us = sorted[sorted.size() / 2];
    double sum = 0.0;
    for (double v : sorted) sum += v;
    out.mean_us = sum / static_cast<double>(sorted.size());
    out.max_us = sorted.back();
    return out;
  }

  /// Approximate footprint of the live loop state (ring buffers, filter
  /// state, policy smoothing windows). Measurement storage is excluded.
  [[nodiscard]] std::size_t state_bytes() const {
    const std::size_t template_len = mf_.length();
    std::size_t bytes = sizeof(*this);
    bytes += 2 * template_len * sizeof(double);           // template + ring
    bytes += (slope_lag_ + 1) * sizeof(double);           // z history
    bytes += 4 * static_cast<std::size_t>(
                     std::max(1.0, control_.ma_window_s / dt_s_)) * sizeof(double);
    return bytes;
  }

 private:
  static policy::ControlConfig configure_control(policy::ControlConfig cfg,
                                                 const bundle::CalibrationBundle& b) {
    // the frozen calibrated threshold becomes the trigger; keep the gap
    const double gap = cfg.z_hi - cfg.z_lo;
    cfg.z_hi = b.record.threshold;
    cfg.z_lo = b.record.threshold - gap;
    return cfg;
  }

  bundle::CalibrationBundle bundle_;
  policy::ControlConfig control_;
  double k_eff_;
  double dt_s_;
  detect::HighPass hpf_;
  detect::MatchedFilter mf_;
  detect::HysteresisLatch latch_;
  kf::FilterState state_;
  kf::NoiseConfig noise_;
  policy::PolicyRuntime runtime_;
  std::deque<double> z_hist_;
  std::size_t slope_lag_ = 10;
  double u_prev_ = 0.0;
  std::vector<double> epoch_costs_us_;
};

/// Run one policy over a synthesized trace.
inline std::vector<EpochLog> run_replay(const bundle::CalibrationBundle& b,
                                        const synth::ScenarioConfig& scenario,
                                        const std::vector<synth::EpochSample>& trace,
                                        const policy::ControlConfig& control,
                                        const kf::NoiseConfig& noise, policy::PolicyId id,
                                        RuntimeStats* stats = nullptr,
                                        std::size_t* state_bytes = nullptr) {
  ReplayEngine engine(b, scenario, control, noise, id);
  std::vector<EpochLog> log;
  log.reserve(trace.size());
  for (const auto& s : trace) log.push_back(engine.step(s));
  if (stats) *stats = engine.runtime_stats();
  if (state_bytes) *state_bytes = engine.state_bytes();
  return log;
}

inline void write_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::InvalidConfig, "cannot write log '" + path + "'");
  out << kLogHeader << "\n";
  char buf[512];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf),
                  "%.10g,%.10g,%.10g,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
                  "%d,%.10g,%.10g,%.10g,%.10g\n",
                  r.t_s, r.y_rad, r.z_norm, r.detected, r.dvtec_hat, r.dvtec_rate_hat, r.bias_hat,
                  r.p11, r.nis, r.m_req_db, r.m_avail_db, r.m_eff_db, r.p_out, r.mcs_index,
                  r.r_bpshz, r.eta, r.bler, r.goodput_bpshz);
    out << buf;
  }
}

inline std::vector<EpochLog> read_log_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::InvalidConfig, "cannot read log '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::EmptySeries, "empty log");
  require(line == kLogHeader, Errc::UnknownFormat, "unexpected log header in '" + path + "'");
  std::vector<EpochLog> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochLog r;
    const int n = std::sscanf(
        line.c_str(),
        "%lf,%lf,%lf,%d,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%d,%lf,%lf,%lf,%lf", &r.t_s,
        &r.y_rad, &r.z_norm, &r.detected, &r.dvtec_hat, &r.dvtec_rate_hat, &r.bias_hat, &r.p11,
        &r.nis, &r.m_req_db, &r.m_avail_db, &r.m_eff_db, &r.p_out, &r.mcs_index, &r.r_bpshz,
        &r.eta, &r.bler, &r.goodput_bpshz);
    require(n == 18, Errc::UnknownFormat, "malformed log row");
    log.push_back(r);
  }
  require(!log.empty(), Errc::EmptySeries, "log has no rows");
  return log;
}

}  // namespace ionolink::pipeline
