#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ionolink/bundle.hpp"
#include "ionolink/pipeline.hpp"
#include "ionolink/stats.hpp"
#include "ionolink/xrs.hpp"

namespace ionolink::run {

using nlohmann::json;

/// Synthetic-flare or archive-file drive for one scenario.
struct DriveSpec {
  enum class Kind { None, File, Synthetic } kind = Kind::Synthetic;
  std::string file;
  xrs::Format format = xrs::Format::Auto;
  std::size_t baseline_window_min = 60;
  synth::SyntheticFlare flare{};
};

/// Full run description parsed from the JSON config tree.
struct RunManifest {
  synth::ScenarioConfig scenario{};
  DriveSpec drive{};
  std::optional<double> target_peak_dvtec_tecu;  // peak-normalized amplitude axis
  detect::DetectorConfig detector{};
  kf::NoiseConfig noise{};
  risk::MarginModel margin{};
  policy::ControlConfig control{};
  phy::McsLadder ladder = phy::McsLadder::defaults();

  // calibration protocol
  double noevent_duration_s = 4800.0;
  std::uint64_t noevent_seed = 424242;
  std::uint64_t event_seed = 515151;
  double event_peak_dvtec_tecu = 6.0;
  double tpre_s = 300.0;
  double warmup_s = 60.0;
  double pout_target = 0.10;
  phy::BlerAnchor anchor_truth{};  // emulated plant used for calibration draws
  double anchor_bin_db = 0.25;
  std::uint64_t anchor_draw_seed = 636363;

  // evaluation protocol
  std::vector<double> gates = {0.2, 0.3, 0.4};
  std::size_t bootstrap_b = 2000;
  double bootstrap_block_s = 12.0;
  double alpha_sig = 0.05;

  // ensemble axes
  std::vector<double> ensemble_a_scale = {3.6, 6.0, 8.4};
  std::vector<double> ensemble_elevation_deg = {30.0, 40.0, 50.0};
  std::vector<double> ensemble_cn0_dbhz = {49.0, 52.0, 55.0};
  std::vector<double> ensemble_tau_hp_s;  // optional extra axis
  std::size_t ensemble_seeds = 3;
};

namespace internal {

template <typename T>
void maybe(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

inline void parse_scenario(const json& j, RunManifest& m) {
  auto& s = m.scenario;
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    maybe(g, "f1_hz", s.geometry.f1_hz);
    maybe(g, "f2_hz", s.geometry.f2_hz);
    maybe(g, "elevation_deg", s.geometry.elevation_deg);
    maybe(g, "shell_height_km", s.geometry.shell_height_km);
    maybe(g, "earth_radius_km", s.geometry.earth_radius_km);
  }
  maybe(j, "cn0_dbhz", s.cn0_dbhz);
  maybe(j, "dt_s", s.dt_s);
  maybe(j, "duration_s", s.duration_s);
  maybe(j, "t0_s", s.t0_s);
  maybe(j, "amplitude_scale", s.amplitude_scale);
  maybe(j, "tau_d_s", s.tau_d_s);
  maybe(j, "alpha0", s.alpha0);
  maybe(j, "gamma_exp", s.gamma_exp);
  maybe(j, "rng_seed", s.rng_seed);
  maybe(j, "vtec0_tecu", s.vtec0_tecu);
  if (j.contains("target_peak_dvtec_tecu") && !j.at("target_peak_dvtec_tecu").is_null())
    m.target_peak_dvtec_tecu = j.at("target_peak_dvtec_tecu").get<double>();
  if (j.contains("chi")) {
    const auto& c = j.at("chi");
    const std::string mode = c.value("mode", "constant");
    if (mode == "constant") {
      s.chi_mode = synth::ChiMode::Constant;
      maybe(c, "chi_rad", s.chi_rad);
    } else if (mode == "computed") {
      s.chi_mode = synth::ChiMode::Computed;
      maybe(c, "lat_deg", s.lat_deg);
      maybe(c, "lon_deg", s.lon_deg);
    } else {
      raise(Errc::InvalidConfig, "chi mode must be 'constant' or 'computed'");
    }
  }
  if (j.contains("bias")) {
    const auto& b = j.at("bias");
    maybe(b, "enabled", s.bias_drift.enabled);
    maybe(b, "q3", s.bias_drift.q3);
    maybe(b, "q4", s.bias_drift.q4);
  }
  maybe(j, "thermal_noise", s.thermal_noise);
  if (j.contains("xrs")) {
    const auto& x = j.at("xrs");
    if (x.is_null()) {
      m.drive.kind = DriveSpec::Kind::None;
    } else if (x.contains("file")) {
      m.drive.kind = DriveSpec::Kind::File;
      m.drive.file = x.at("file").get<std::string>();
      const std::string fmt = x.value("format", "auto");
      m.drive.format = fmt == "ncei"   ? xrs::Format::Ncei
                       : fmt == "swpc" ? xrs::Format::Swpc
                                       : xrs::Format::Auto;
      std::size_t win = m.drive.baseline_window_min;
      maybe(x, "baseline_window_min", win);
      m.drive.baseline_window_min = win;
    } else if (x.contains("synthetic")) {
      m.drive.kind = DriveSpec::Kind::Synthetic;
      const auto& f = x.at("synthetic");
      maybe(f, "peak_wm2", m.drive.flare.peak_wm2);
      maybe(f, "background_wm2", m.drive.flare.background_wm2);
      maybe(f, "onset_min", m.drive.flare.onset_min);
      maybe(f, "rise_min", m.drive.flare.rise_min);
      maybe(f, "decay_min", m.drive.flare.decay_min);
      maybe(f, "duration_min", m.drive.flare.duration_min);
      maybe(f, "start_epoch_s", m.drive.flare.start_epoch_s);
    } else {
      raise(Errc::InvalidConfig, "xrs section needs 'file', 'synthetic', or null");
    }
  }
}

inline void parse_manifest_tree(const json& j, RunManifest& m) {
  if (j.contains("scenario")) parse_scenario(j.at("scenario"), m);
  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    maybe(d, "tau_hp_s", m.detector.tau_hp_s);
    maybe(d, "window_s", m.detector.window_s);
    maybe(d, "alpha_fa", m.detector.alpha_fa);
    maybe(d, "z_hi", m.detector.z_hi);
    maybe(d, "z_lo", m.detector.z_lo);
    maybe(d, "template_rise_s", m.detector.template_rise_s);
    maybe(d, "template_decay_s", m.detector.template_decay_s);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    maybe(n, "q1", m.noise.q1);
    maybe(n, "q2", m.noise.q2);
    maybe(n, "q3", m.noise.q3);
    maybe(n, "q4", m.noise.q4);
  }
  if (j.contains("margin")) {
    const auto& g = j.at("margin");
    maybe(g, "m0_db", m.margin.m0_db);
    maybe(g, "k1_db_per_tecu", m.margin.k1_db_per_tecu);
    maybe(g, "k2_db_per_tecu_s", m.margin.k2_db_per_tecu_s);
    maybe(g, "rho", m.margin.rho);
    maybe(g, "gamma0_db", m.margin.gamma0_db);
  }
  if (j.contains("control")) {
    const auto& c = j.at("control");
    maybe(c, "eta_min", m.control.eta_min);
    maybe(c, "eta_max", m.control.eta_max);
    maybe(c, "eta0", m.control.eta0);
    if (c.contains("eta_mode")) {
      const std::string mode = c.at("eta_mode").get<std::string>();
      if (mode == "fixed")
        m.control.eta_mode = policy::EtaMode::Fixed;
      else if (mode == "shared-law")
        m.control.eta_mode = policy::EtaMode::SharedLaw;
      else
        raise(Errc::InvalidConfig, "eta_mode must be 'fixed' or 'shared-law'");
    }
    maybe(c, "m_sat_db", m.control.m_sat_db);
    maybe(c, "dwell_min_s", m.control.dwell_min_s);
    maybe(c, "tau_gate", m.control.tau_gate);
    maybe(c, "horizon_s", m.control.horizon_s);
    maybe(c, "delta_m_db", m.control.delta_m_db);
    maybe(c, "m_safe_db", m.control.m_safe_db);
    maybe(c, "ma_window_s", m.control.ma_window_s);
    maybe(c, "acm_hold_s", m.control.acm_hold_s);
    maybe(c, "beta", m.control.beta);
  }
  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    maybe(c, "noevent_duration_s", m.noevent_duration_s);
    maybe(c, "noevent_seed", m.noevent_seed);
    maybe(c, "event_seed", m.event_seed);
    maybe(c, "event_peak_dvtec_tecu", m.event_peak_dvtec_tecu);
    maybe(c, "tpre_s", m.tpre_s);
    maybe(c, "warmup_s", m.warmup_s);
    maybe(c, "pout_target", m.pout_target);
    maybe(c, "anchor_bin_db", m.anchor_bin_db);
    maybe(c, "anchor_draw_seed", m.anchor_draw_seed);
    if (c.contains("anchor_truth")) {
      maybe(c.at("anchor_truth"), "k_slope", m.anchor_truth.k_slope);
      maybe(c.at("anchor_truth"), "m_piv_db", m.anchor_truth.m_piv_db);
    }
  }
  if (j.contains("gates")) m.gates = j.at("gates").get<std::vector<double>>();
  if (j.contains("bootstrap")) {
    const auto& b = j.at("bootstrap");
    maybe(b, "b", m.bootstrap_b);
    maybe(b, "block_len_s", m.bootstrap_block_s);
    maybe(b, "alpha_sig", m.alpha_sig);
  }
  if (j.contains("ensemble")) {
    const auto& e = j.at("ensemble");
    if (e.contains("a_scale")) m.ensemble_a_scale = e.at("a_scale").get<std::vector<double>>();
    if (e.contains("elevation_deg"))
      m.ensemble_elevation_deg = e.at("elevation_deg").get<std::vector<double>>();
    if (e.contains("cn0_dbhz")) m.ensemble_cn0_dbhz = e.at("cn0_dbhz").get<std::vector<double>>();
    if (e.contains("tau_hp_s")) m.ensemble_tau_hp_s = e.at("tau_hp_s").get<std::vector<double>>();
    maybe(e, "seeds", m.ensemble_seeds);
  }
}

}  // namespace internal

inline RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::InvalidConfig, "cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(Errc::InvalidConfig, std::string("config parse error: ") + e.what());
  }
  RunManifest m;
  internal::parse_manifest_tree(j, m);
  // data files referenced by the config resolve against its directory
  if (m.drive.kind == DriveSpec::Kind::File && !m.drive.file.empty() &&
      std::filesystem::path(m.drive.file).is_relative()) {
    const auto resolved = std::filesystem::path(path).parent_path() / m.drive.file;
    if (std::filesystem::exists(resolved)) m.drive.file = resolved.string();
  }
  m.scenario.validate();
  m.detector.validate();
  m.control.validate();
  m.margin.validate();
  m.ladder.validate();
  return m;
}

inline RunManifest default_manifest() { return RunManifest{}; }

/// Resolved disturbance for one scenario: the dVTEC minute series plus the
/// onset alignment offset.
struct ResolvedDrive {
  synth::MinuteSeries dvtec;
  double onset_offset_s = 0.0;
  std::size_t gap_minutes = 0;
  double peak_tecu = 0.0;
};

/// Build the dVTEC drive for a manifest: ingest (file or synthetic profile),
/// detrend, map through the driven relaxation, then apply the peak-targeted
/// amplitude normalization when requested.
inline ResolvedDrive resolve_drive(const RunManifest& m) {
  ResolvedDrive out;
  if (m.drive.kind == DriveSpec::Kind::None) return out;

  xrs::XrsSeries series = m.drive.kind == DriveSpec::Kind::File
                              ? xrs::parse_xrs_file(m.drive.file, m.drive.format)
                              : synth::synthesize_xrs(m.drive.flare);
  const auto dfx = xrs::detrend_flux(
      series, std::min<std::size_t>(m.drive.baseline_window_min, series.size()));

  synth::ScenarioConfig cfg = m.scenario;
  cfg.amplitude_scale = 1.0;
  synth::MinuteSeries unit = synth::xrs_to_dvtec(series.timestamps_utc, dfx, cfg);
  double peak = 0.0;
  for (double v : unit.values) peak = std::max(peak, v);

  double scale = m.scenario.amplitude_scale;
  if (m.target_peak_dvtec_tecu) {
    require(peak > 0.0, Errc::InvalidConfig, "cannot peak-normalize a zero drive");
    scale = *m.target_peak_dvtec_tecu / peak;
  }
  for (double& v : unit.values) v *= scale;

  out.dvtec = std::move(unit);
  out.gap_minutes = out.dvtec.gap_minutes;
  out.peak_tecu = peak * scale;
  // align on the flux onset (sharp), not the relaxation response (slow to
  // build), so the pre-event interval stays genuinely quiet
  const auto drive_grid = synth::to_minute_grid(series.timestamps_utc, dfx);
  const auto onset = synth::drive_onset_offset(drive_grid);
  out.onset_offset_s = onset.value_or(0.0);
  return out;
}

inline std::vector<synth::EpochSample> synthesize_scenario(const RunManifest& m) {
  const ResolvedDrive drive = resolve_drive(m);
  return synth::synthesize_trace(drive.dvtec, m.scenario, drive.onset_offset_s);
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

/// One-time calibration: freeze the detector threshold and sigma_pre on a
/// no-event log, the BLER anchor on a no-adapt replay of a disjoint
/// calibration event (empirical block-error rates binned by effective
/// margin), and the outage baseline c on the pre-event interval.
inline bundle::CalibrationBundle calibrate(const RunManifest& m) {
  require(m.drive.kind != DriveSpec::Kind::None, Errc::InvalidConfig,
          "calibration needs an event drive (file or synthetic) for the anchor fit");
  bundle::CalibrationBundle b;
  b.detector = m.detector;
  b.ladder = m.ladder;
  b.margin = m.margin;
  b.dt_s = m.scenario.dt_s;
  b.noevent_seed = m.noevent_seed;
  b.event_seed = m.event_seed;

  // 1. no-event log -> front-end statistics
  synth::ScenarioConfig quiet = m.scenario;
  quiet.duration_s = m.noevent_duration_s;
  quiet.rng_seed = m.noevent_seed;
  const auto quiet_trace = synth::synthesize_trace(synth::MinuteSeries{}, quiet, 0.0);
  detect::HighPass hpf(m.detector.tau_hp_s, quiet.dt_s);
  detect::MatchedFilter mf(detect::build_template(m.detector.window_s, quiet.dt_s,
                                                  m.detector.template_rise_s,
                                                  m.detector.template_decay_s));
  std::vector<double> z_raw(quiet_trace.size());
  for (std::size_t k = 0; k < quiet_trace.size(); ++k)
    z_raw[k] = mf.step(hpf.step(quiet_trace[k].y_rad));
  b.record = detect::calibrate_threshold(z_raw, m.detector.window_s, quiet.dt_s,
                                         m.detector.alpha_fa);
  b.detector.z_hi = b.record.threshold;
  b.detector.z_lo = b.record.threshold - m.detector.hysteresis_gap();

  // 2. calibration event replay (no-adapt) with a provisional anchor
  RunManifest event = m;
  event.scenario.rng_seed = m.event_seed;
  event.target_peak_dvtec_tecu = m.event_peak_dvtec_tecu;
  const auto event_trace = synthesize_scenario(event);

  bundle::CalibrationBundle provisional = b;
  provisional.anchor = m.anchor_truth;  // scoring placeholder; replaced by the fit below
  provisional.anchor.frozen = true;
  provisional.margin.c_frozen = true;
  const auto log = pipeline::run_replay(provisional, event.scenario, event_trace, m.control,
                                        m.noise, policy::PolicyId::NoAdapt);

  // empirical block-error rates from the emulated plant, binned by m_eff
  struct Bin {
    double sum_m = 0.0;
    std::size_t n = 0;
    std::size_t errors = 0;
  };
  std::map<long, Bin> bins;
  Rng draw(m.anchor_draw_seed);
  for (const auto& row : log) {
    const double p_err = phy::bler(row.m_eff_db, m.anchor_truth);
    const bool block_error = draw.uniform() < p_err;
    const long key = static_cast<long>(std::floor(row.m_eff_db / m.anchor_bin_db));
    auto& bin = bins[key];
    bin.sum_m += row.m_eff_db;
    bin.n += 1;
    bin.errors += block_error ? 1 : 0;
  }
  std::vector<phy::BlerSample> pairs;
  for (const auto& [key, bin] : bins) {
    if (bin.n < 10) continue;  // skip sparsely populated bins
    const double n = static_cast<double>(bin.n);
    // continuity-corrected rate keeps saturated bins finite in logit space
    const double rate = (static_cast<double>(bin.errors) + 0.5) / (n + 1.0);
    pairs.push_back({bin.sum_m / n, rate, n});
  }
  phy::fit_bler_anchor(b.anchor, pairs);

  // 3. outage baseline c on the pre-event interval
  std::vector<risk::PreEventForecast> pre;
  const double t_lo = m.scenario.t0_s - m.tpre_s;
  require(t_lo >= m.warmup_s, Errc::InvalidConfig,
          "pre-event interval must start after the warm-up");
  for (const auto& row : log)
    if (row.t_s >= t_lo && row.t_s < m.scenario.t0_s)
      pre.push_back({row.mu_req_h_db, row.sigma_req_h_db, row.m_avail_db});
  risk::calibrate_offset_c(b.margin, pre, m.pout_target);

  b.require_frozen();
  return b;
}

inline void cmd_calibrate(const RunManifest& m, const std::string& bundle_path) {
  const auto b = calibrate(m);
  bundle::save_bundle(b, bundle_path);
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

struct ReplayOutput {
  std::vector<pipeline::EpochLog> log;
  pipeline::RuntimeStats runtime{};
  std::size_t state_bytes = 0;
};

inline ReplayOutput replay(const RunManifest& m, const bundle::CalibrationBundle& b,
                           policy::PolicyId id) {
  const auto trace = synthesize_scenario(m);
  ReplayOutput out;
  out.log = pipeline::run_replay(b, m.scenario, trace, m.control, m.noise, id, &out.runtime,
                                 &out.state_bytes);
  return out;
}

inline ReplayOutput cmd_replay(const RunManifest& m, const std::string& bundle_path,
                               const std::string& policy_name, const std::string& out_csv) {
  const auto b = bundle::load_bundle(bundle_path);
  auto out = replay(m, b, policy::policy_from_name(policy_name));
  if (!out_csv.empty()) pipeline::write_log_csv(out.log, out_csv);
  return out;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct StatRow {
  std::string metric;   // "dBLER" or "dT"
  std::string gate;     // "full" or the numeric gate
  std::size_t n = 0;
  stats::BootstrapResult boot{};
  bool reject_raw = false;
  bool reject_holm = false;
  double p_holm = 1.0;
};

struct WorstWindowRow {
  std::string metric;
  double start_s = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double change = 0.0;  // relative reduction for BLER, absolute gain for goodput
};

struct EvaluationResult {
  std::vector<StatRow> rows;
  std::vector<WorstWindowRow> worst;
};

/// Paired comparison of two per-epoch logs on a shared grid: full-timeline
/// and risk-gated bootstrap statistics with Holm correction across gates,
/// plus the worst-60 s window descriptives. Log A is the reference
/// (typically no-adapt); deltas are oriented so positive favors log B.
inline EvaluationResult evaluate(const std::vector<pipeline::EpochLog>& log_a,
                                 const std::vector<pipeline::EpochLog>& log_b,
                                 const RunManifest& m, std::uint64_t boot_seed = 2024) {
  require(log_a.size() == log_b.size(), Errc::GridMismatch, "logs differ in length");
  for (std::size_t k = 0; k < log_a.size(); ++k)
    require(log_a[k].t_s == log_b[k].t_s, Errc::GridMismatch, "logs differ in time grid");

  stats::PairedSeries dbler, dt;
  std::vector<double> gate_signal(log_a.size());
  for (std::size_t k = 0; k < log_a.size(); ++k) {
    dbler.t_s.push_back(log_a[k].t_s);
    dbler.delta.push_back(log_a[k].bler - log_b[k].bler);
    dt.t_s.push_back(log_a[k].t_s);
    dt.delta.push_back(log_b[k].goodput_bpshz - log_a[k].goodput_bpshz);
    gate_signal[k] = log_a[k].p_out;  // reference-policy risk defines the stressed epochs
  }

  EvaluationResult res;
  const auto add_row = [&](const std::string& metric, const std::string& gate,
                           const stats::PairedSeries& series, std::uint64_t seed) {
    StatRow row;
    row.metric = metric;
    row.gate = gate;
    row.n = series.size();
    row.boot = stats::moving_block_bootstrap(series, m.bootstrap_block_s, m.bootstrap_b, seed);
    try {
      row.boot.cohens_d = stats::cohens_d(series, m.bootstrap_block_s);
    } catch (const Error&) {
      row.boot.cohens_d = 0.0;  // degenerate spread on constant deltas
    }
    row.reject_raw = row.boot.p_value <= m.alpha_sig;
    res.rows.push_back(row);
  };

  std::uint64_t salt = 0;
  for (const auto* series : {&dbler, &dt}) {
    const std::string metric = series == &dbler ? "dBLER" : "dT";
    add_row(metric, "full", *series, boot_seed + salt++);
    std::vector<std::size_t> gated_rows;
    std::vector<double> gate_ps;
    for (double gate : m.gates) {
      char name[32];
      std::snprintf(name, sizeof(name), "%.2f", gate);
      const auto subset = stats::gated_subset(*series, gate_signal, gate);
      add_row(metric, name, subset, boot_seed + salt++);
      gated_rows.push_back(res.rows.size() - 1);
      gate_ps.push_back(res.rows.back().boot.p_value);
    }
    const auto holm = stats::holm_bonferroni(gate_ps, m.alpha_sig);
    for (std::size_t i = 0; i < gated_rows.size(); ++i) {
      res.rows[gated_rows[i]].reject_holm = holm.reject[i];
      res.rows[gated_rows[i]].p_holm = holm.p_adjusted[i];
    }
  }

  // worst 60 s window centered at the reference outage crest
  std::vector<double> bler_a(log_a.size()), bler_b(log_a.size());
  std::vector<double> t_a(log_a.size()), t_b(log_a.size());
  for (std::size_t k = 0; k < log_a.size(); ++k) {
    bler_a[k] = log_a[k].bler;
    bler_b[k] = log_b[k].bler;
    t_a[k] = log_a[k].goodput_bpshz;
    t_b[k] = log_b[k].goodput_bpshz;
  }
  const double dt_s = m.scenario.dt_s;
  const auto wa = stats::worst_window(bler_a, gate_signal, dt_s, 60.0);
  const auto wb = stats::worst_window(bler_b, gate_signal, dt_s, 60.0);
  WorstWindowRow bler_row;
  bler_row.metric = "peak_bler";
  bler_row.start_s = wa.start_s;
  bler_row.mean_a = wa.mean_metric;
  bler_row.mean_b = wb.mean_metric;
  bler_row.change = wa.mean_metric > 0.0 ? (wa.mean_metric - wb.mean_metric) / wa.mean_metric : 0.0;
  res.worst.push_back(bler_row);

  const auto ga = stats::worst_window(t_a, gate_signal, dt_s, 60.0);
  const auto gb = stats::worst_window(t_b, gate_signal, dt_s, 60.0);
  WorstWindowRow good_row;
  good_row.metric = "goodput";
  good_row.start_s = ga.start_s;
  good_row.mean_a = ga.mean_metric;
  good_row.mean_b = gb.mean_metric;
  good_row.change = gb.mean_metric - ga.mean_metric;
  res.worst.push_back(good_row);
  return res;
}

inline void write_results_csv(const EvaluationResult& res, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::InvalidConfig, "cannot write results '" + path + "'");
  out << "metric,gate,n,mean,ci_low,ci_high,p_raw,p_holm,reject_raw,reject_holm,cohens_d,"
         "block_len_s,B\n";
  char buf[320];
  for (const auto& r : res.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d,%.10g,%.10g,%zu\n",
                  r.metric.c_str(), r.gate.c_str(), r.n, r.boot.mean, r.boot.ci_low,
                  r.boot.ci_high, r.boot.p_value, r.gate == "full" ? r.boot.p_value : r.p_holm,
                  r.reject_raw ? 1 : 0, r.reject_holm ? 1 : 0, r.boot.cohens_d, r.boot.block_len_s,
                  r.boot.b);
    out << buf;
  }
}

inline void write_worst_window_csv(const EvaluationResult& res, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::InvalidConfig, "cannot write worst-window table '" + path + "'");
  out << "metric,start_s,mean_ref,mean_adapt,change\n";
  char buf[200];
  for (const auto& w : res.worst) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g\n", w.metric.c_str(), w.start_s,
                  w.mean_a, w.mean_b, w.change);
    out << buf;
  }
}

inline EvaluationResult cmd_evaluate(const RunManifest& m, const std::string& bundle_path,
                                     const std::string& log_a_path, const std::string& log_b_path,
                                     const std::string& out_dir) {
  (void)bundle::load_bundle(bundle_path);  // enforce the frozen protocol
  const auto log_a = pipeline::read_log_csv(log_a_path);
  const auto log_b = pipeline::read_log_csv(log_b_path);
  const auto res = evaluate(log_a, log_b, m);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_results_csv(res, out_dir + "/results.csv");
    write_worst_window_csv(res, out_dir + "/worst_window.csv");
  }
  return res;
}

// ---------------------------------------------------------------------------
// ensemble
// ---------------------------------------------------------------------------

struct EnsembleRow {
  double tau_hp_s = 0.0;
  double a_scale = 0.0;
  double elevation_deg = 0.0;
  double cn0_dbhz = 0.0;
  double dt_mean = 0.0;
  double dt_std = 0.0;
  double dbler_mean = 0.0;
  double dbler_std = 0.0;
  std::size_t seeds = 0;
};

/// Cross-product sweep over the event-strength / elevation / C/N0 axes (and
/// optionally the high-pass constant). Each cell averages the risk-gated
/// adapt-1+2 vs no-adapt deltas over independent seeds against a bundle
/// calibrated once per front-end setting.
inline std::vector<EnsembleRow> ensemble(const RunManifest& base, double gate = 0.3,
                                         const bundle::CalibrationBundle* preloaded = nullptr) {
  std::vector<double> taus = base.ensemble_tau_hp_s;
  if (taus.empty()) taus.push_back(base.detector.tau_hp_s);

  std::vector<EnsembleRow> rows;
  for (double tau : taus) {
    RunManifest m = base;
    m.detector.tau_hp_s = tau;
    const bool reuse = preloaded != nullptr && taus.size() == 1 && tau == base.detector.tau_hp_s;
    const bundle::CalibrationBundle b = reuse ? *preloaded : calibrate(m);

    std::uint64_t cell_idx = 0;
    for (double a : base.ensemble_a_scale)
      for (double e : base.ensemble_elevation_deg)
        for (double c : base.ensemble_cn0_dbhz) {
          std::vector<double> dts, dblers;
          for (std::size_t s = 0; s < base.ensemble_seeds; ++s) {
            RunManifest cell = m;
            cell.target_peak_dvtec_tecu = a;
            cell.scenario.geometry.elevation_deg = e;
            cell.scenario.cn0_dbhz = c;
            std::uint64_t mix = base.scenario.rng_seed ^ (cell_idx * 1000003ULL + s * 7919ULL);
            cell.scenario.rng_seed = splitmix64(mix);
            const auto trace = synthesize_scenario(cell);
            const auto log_no = pipeline::run_replay(b, cell.scenario, trace, cell.control,
                                                     cell.noise, policy::PolicyId::NoAdapt);
            const auto log_ad = pipeline::run_replay(b, cell.scenario, trace, cell.control,
                                                     cell.noise, policy::PolicyId::Adapt12);
            stats::PairedSeries dbler, dt;
            std::vector<double> gate_signal;
            for (std::size_t k = 0; k < log_no.size(); ++k) {
              dbler.t_s.push_back(log_no[k].t_s);
              dbler.delta.push_back(log_no[k].bler - log_ad[k].bler);
              dt.t_s.push_back(log_no[k].t_s);
              dt.delta.push_back(log_ad[k].goodput_bpshz - log_no[k].goodput_bpshz);
              gate_signal.push_back(log_no[k].p_out);
            }
            const auto g_dbler = stats::gated_subset(dbler, gate_signal, gate);
            const auto g_dt = stats::gated_subset(dt, gate_signal, gate);
            dblers.push_back(num::mean(g_dbler.delta));
            dts.push_back(num::mean(g_dt.delta));
          }
          EnsembleRow row;
          row.tau_hp_s = tau;
          row.a_scale = a;
          row.elevation_deg = e;
          row.cn0_dbhz = c;
          row.dt_mean = num::mean(dts);
          row.dbler_mean = num::mean(dblers);
          row.dt_std = dts.size() > 1 ? num::sample_std(dts) : 0.0;
          row.dbler_std = dblers.size() > 1 ? num::sample_std(dblers) : 0.0;
          row.seeds = base.ensemble_seeds;
          rows.push_back(row);
          ++cell_idx;
        }
  }
  return rows;
}

inline void write_ensemble_csv(const std::vector<EnsembleRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::InvalidConfig, "cannot write ensemble table '" + path + "'");
  out << "tau_hp_s,a_scale,elevation_deg,cn0_dbhz,dT_mean,dT_std,dBLER_mean,dBLER_std,seeds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%zu\n",
                  r.tau_hp_s, r.a_scale, r.elevation_deg, r.cn0_dbhz, r.dt_mean, r.dt_std,
                  r.dbler_mean, r.dbler_std, r.seeds);
    out << buf;
  }
}

}  // namespace ionolink::run
