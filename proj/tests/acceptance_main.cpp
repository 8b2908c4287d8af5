// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ionolink/orchestrator.hpp"
#include "ionolink/orchestrator_export.hpp"

using namespace ionolink;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  Criterion(int number, std::string title)
      : number_(number), title_(std::move(title)), start_(std::chrono::steady_clock::now()) {}

  void check(bool ok, const std::string& detail) {
    ok_ = ok_ && ok;
    if (!ok) details_ += (details_.empty() ? "" : "; ") + detail;
    else if (details_.empty()) last_good_ = detail;
  }

  void finish(double budget_s = 0.0) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (budget_s > 0.0 && elapsed > budget_s) {
      ok_ = false;
      details_ += (details_.empty() ? "" : "; ") + std::string("runtime budget exceeded");
    }
    std::printf("%s  criterion %2d: %s (%.1f s)%s%s\n", ok_ ? "PASS" : "FAIL", number_,
                title_.c_str(), elapsed, ok_ ? (last_good_.empty() ? "" : " -- ") : " -- ",
                ok_ ? last_good_.c_str() : details_.c_str());
    std::fflush(stdout);
    if (!ok_) ++g_failures;
  }

 private:
  int number_;
  std::string title_;
  std::chrono::steady_clock::time_point start_;
  bool ok_ = true;
  std::string details_;
  std::string last_good_;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

run::RunManifest stress_manifest() {
  run::RunManifest m;
  m.scenario.duration_s = 2400.0;
  m.scenario.t0_s = 900.0;
  m.scenario.rng_seed = 31337;
  m.scenario.geometry.elevation_deg = 30.0;
  m.scenario.cn0_dbhz = 49.0;
  m.drive.kind = run::DriveSpec::Kind::Synthetic;
  m.target_peak_dvtec_tecu = 8.4;
  m.event_peak_dvtec_tecu = 6.0;
  return m;
}

run::RunManifest base_manifest() {
  run::RunManifest m = stress_manifest();
  m.scenario.geometry.elevation_deg = 40.0;
  m.scenario.cn0_dbhz = 52.0;
  m.target_peak_dvtec_tecu = 6.0;
  return m;
}

void criterion_1_constants() {
  Criterion c(1, "geometry constants");
  geo::GeometryConfig cfg;
  const double k_gf = geo::gf_coefficient(cfg);
  c.check(std::abs(k_gf - 0.0106) < 1e-4, fmt("k_GF=%.6f", k_gf));
  const double quoted[3][2] = {{30.0, 1.75}, {40.0, 1.45}, {50.0, 1.26}};
  for (const auto& q : quoted) {
    geo::GeometryConfig g;
    g.elevation_deg = q[0];
    const double map = geo::mapping_factor(g);
    c.check(std::abs(map - q[1]) < 0.01, fmt("M(%.0f)=%.4f", q[0], map));
  }
  c.check(true, fmt("k_GF=%.6f, M(30/40/50) quoted values matched", k_gf));
  c.finish(1.0);
}

void criterion_2_noise_law() {
  Criterion c(2, "GF thermal-noise law at 52 dB-Hz");
  synth::ScenarioConfig cfg;
  cfg.duration_s = 12000.0;  // 1.2e5 samples
  cfg.bias_drift.enabled = false;
  cfg.cn0_dbhz = 52.0;
  cfg.rng_seed = 777;
  const auto trace = synth::synthesize_trace(synth::MinuteSeries{}, cfg, 0.0);
  std::vector<double> y(trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) y[k] = trace[k].y_rad;
  const double var = num::sample_variance(y);
  c.check(std::abs(var - 6.3e-5) / 6.3e-5 < 0.05,
          fmt("sample var=%.4g rad^2 vs 6.3e-5 (%.2f%% off)", var,
              100.0 * std::abs(var - 6.3e-5) / 6.3e-5));
  c.finish(10.0);
}

void criterion_3_filter_consistency() {
  Criterion c(3, "KF self-consistency: NIS and 95% band coverage");
  const double dt = 0.1;
  const double k_eff = 0.0154;
  kf::NoiseConfig noise;
  noise.r_var = kf::NoiseConfig::measurement_variance(52.0, dt);
  const int runs = 1000, steps = 100;  // 1e5 pooled filter steps
  double nis_sum = 0.0;
  long covered = 0;
  for (int r = 0; r < runs; ++r) {
    Rng rng = Rng::substream(12345u, static_cast<std::uint64_t>(r));
    kf::FilterState state = kf::kf_init();
    kf::Vec4 truth{};
    for (int i = 0; i < 4; ++i) truth[i] = std::sqrt(state.p[i][i]) * rng.gaussian();
    for (int k = 0; k < steps; ++k) {
      truth[0] += dt * truth[1] + std::sqrt(noise.q1 * dt) * rng.gaussian();
      truth[1] += std::sqrt(noise.q2 * dt) * rng.gaussian();
      truth[2] += dt * truth[3] + std::sqrt(noise.q3 * dt) * rng.gaussian();
      truth[3] += std::sqrt(noise.q4 * dt) * rng.gaussian();
      const double y = k_eff * truth[0] + truth[2] + std::sqrt(noise.r_var) * rng.gaussian();
      state = kf::kf_step(state, y, dt, k_eff, noise);
      nis_sum += state.last_nis;
      if (std::abs(truth[0] - state.x_hat[0]) <= kf::confidence_band(state)) ++covered;
    }
  }
  const double n = static_cast<double>(runs) * steps;
  const double mean_nis = nis_sum / n;
  const double coverage = static_cast<double>(covered) / n;
  c.check(mean_nis >= 0.97 && mean_nis <= 1.03, fmt("mean NIS=%.4f", mean_nis));
  c.check(coverage >= 0.94 && coverage <= 0.96, fmt("coverage=%.4f", coverage));
  c.check(true, fmt("mean NIS=%.4f, coverage=%.4f over 1e5 steps", mean_nis, coverage));
  c.finish(30.0);
}

void criterion_4_detector_calibration() {
  Criterion c(4, "false-alarm control at the Gumbel-extrapolated threshold");
  const double q999 = detect::gumbel_quantile({0.0, 1.0}, 0.999);
  c.check(std::abs(q999 - 6.907) < 1e-3, fmt("std Gumbel 0.999 quantile=%.4f", q999));

  // freeze the threshold on the 4800 s no-event log
  const auto m = base_manifest();
  const auto b = run::calibrate(m);

  // 200 fresh windows (one long fresh-seed no-event run, prefix block dropped)
  const std::size_t block = b.detector.window_len(m.scenario.dt_s);
  const int windows = 200;
  synth::ScenarioConfig quiet = m.scenario;
  quiet.duration_s = static_cast<double>(windows + 1) * b.detector.window_s;
  quiet.rng_seed = 99001;  // disjoint from the calibration seed
  const auto trace = synth::synthesize_trace(synth::MinuteSeries{}, quiet, 0.0);
  detect::HighPass hpf(b.detector.tau_hp_s, quiet.dt_s);
  detect::MatchedFilter mf(detect::build_template(b.detector.window_s, quiet.dt_s,
                                                  b.detector.template_rise_s,
                                                  b.detector.template_decay_s));
  int alarms = 0;
  bool window_hit = false;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const double z = mf.step(hpf.step(trace[k].y_rad)) / b.record.sigma_pre;
    if (k >= block && z >= b.record.threshold) window_hit = true;
    if (k >= block && (k + 1) % block == 0) {
      alarms += window_hit ? 1 : 0;
      window_hit = false;
    }
  }
  const double rate = static_cast<double>(alarms) / windows;
  c.check(rate <= 2.0 * b.detector.alpha_fa,
          fmt("empirical FA rate=%.4f vs 2*alpha=%.4f", rate, 2.0 * b.detector.alpha_fa));
  c.check(true, fmt("quantile=%.4f, FA windows=%.0f/200 at threshold %.3f", q999,
                    static_cast<double>(alarms), b.record.threshold));
  c.finish(60.0);
}

void criterion_5_rate_margin_slope() {
  Criterion c(5, "rate-margin slope range");
  const double lo = phy::rate_margin_slope(0.75, 10.0);
  const double hi = phy::rate_margin_slope(0.75, 30.0);
  c.check(std::abs(lo - 0.226) < 1e-3, fmt("slope(10)=%.5f", lo));
  c.check(std::abs(hi - 0.241) < 1e-3, fmt("slope(30)=%.5f", hi));
  for (double g = 10.0; g <= 30.0; g += 0.5) {
    const double s = phy::rate_margin_slope(0.75, g);
    c.check(s >= 0.226 - 1e-3 && s <= 0.241 + 1e-3, fmt("slope(%.1f)=%.5f out of range", g, s));
  }
  c.check(true, fmt("slope spans [%.4f, %.4f] bps/Hz/dB", lo, hi));
  c.finish();
}

void criterion_6_phy_round_trip() {
  Criterion c(6, "BLER/margin-threshold round trip");
  phy::BlerAnchor anchor;  // Table defaults: k=1.01, m_piv=0.72, floors (0,1)
  double worst = 0.0;
  for (double beta : {0.01, 0.1, 0.5}) {
    const double m = phy::margin_threshold(beta, anchor);
    const double back = phy::bler(m, anchor);
    worst = std::max(worst, std::abs(back - beta));
    c.check(std::abs(back - beta) < 1e-9, fmt("beta=%.2f round trip error %.2e", beta, back - beta));
  }
  c.check(true, fmt("max round-trip error %.2e", worst));
  c.finish();
}

void criterion_7_closed_loop(const bundle::CalibrationBundle& b) {
  Criterion c(7, "closed-loop ordering on the stress scenario");
  auto stress = stress_manifest();
  const auto trace = run::synthesize_scenario(stress);
  const auto log_no = pipeline::run_replay(b, stress.scenario, trace, stress.control, stress.noise,
                                           policy::PolicyId::NoAdapt);
  const auto log_ad = pipeline::run_replay(b, stress.scenario, trace, stress.control, stress.noise,
                                           policy::PolicyId::Adapt12);
  const auto res = run::evaluate(log_no, log_ad, stress);
  double dbler = 0.0, dt = 0.0, p_dbler = 1.0, p_dt = 1.0;
  for (const auto& row : res.rows) {
    if (row.gate != "0.30") continue;
    if (row.metric == "dBLER") {
      dbler = row.boot.mean;
      p_dbler = row.boot.p_value;
    } else {
      dt = row.boot.mean;
      p_dt = row.boot.p_value;
    }
  }
  c.check(dbler > 0.0 && p_dbler < 0.05, fmt("gated dBLER=%.4f (p=%.4f)", dbler, p_dbler));
  c.check(dt > 0.0 && p_dt < 0.05, fmt("gated dT=%.4f (p=%.4f)", dt, p_dt));
  const double reduction = res.worst[0].change;
  c.check(reduction >= 0.15, fmt("worst-60s peak-BLER reduction=%.3f", reduction));
  c.check(true, fmt("gated dBLER=%+.4f, dT=%+.4f, peak-BLER reduction=%.1f%%", dbler, dt,
                    100.0 * reduction));
  c.finish(300.0);
}

void criterion_8_ensemble() {
  Criterion c(8, "ensemble monotonicity across event strength and elevation");
  auto m = base_manifest();
  m.ensemble_seeds = 3;
  const auto rows = run::ensemble(m, 0.3);
  const auto find = [&](double a, double e, double cn) {
    for (const auto& r : rows)
      if (r.a_scale == a && r.elevation_deg == e && r.cn0_dbhz == cn) return r.dt_mean;
    return 0.0;
  };
  int ok_a = 0, ok_e = 0;
  for (double e : {30.0, 40.0, 50.0})
    for (double cn : {49.0, 52.0, 55.0}) ok_a += find(8.4, e, cn) > find(3.6, e, cn) ? 1 : 0;
  for (double a : {3.6, 6.0, 8.4})
    for (double cn : {49.0, 52.0, 55.0}) ok_e += find(a, 30.0, cn) > find(a, 50.0, cn) ? 1 : 0;
  c.check(rows.size() == 27, fmt("grid rows=%.0f", static_cast<double>(rows.size())));
  c.check(ok_a >= 8, fmt("dT rises with event strength in %.0f/9", static_cast<double>(ok_a)));
  c.check(ok_e >= 8, fmt("dT falls with elevation in %.0f/9", static_cast<double>(ok_e)));
  c.check(true, fmt("A-axis %.0f/9, elevation axis %.0f/9", static_cast<double>(ok_a),
                    static_cast<double>(ok_e)));
  c.finish(1800.0);
}

void criterion_9_statistics_oracles() {
  Criterion c(9, "statistics oracles");
  stats::PairedSeries s;
  for (int i = 0; i < 9; ++i) {
    s.t_s.push_back(static_cast<double>(i));
    s.delta.push_back(1.0 + static_cast<double>(i / 3));
  }
  const double d = stats::cohens_d(s, 3.0);
  c.check(std::abs(d - 2.0) < 1e-12, fmt("cohens d=%.4f", d));

  const auto holm = stats::holm_bonferroni({0.001, 0.02, 0.04}, 0.05);
  c.check(holm.reject[0] && holm.reject[1] && holm.reject[2], "Holm did not reject all three");

  stats::PairedSeries constant;
  for (int i = 0; i < 400; ++i) {
    constant.t_s.push_back(0.1 * i);
    constant.delta.push_back(0.05);
  }
  const auto boot = stats::moving_block_bootstrap(constant, 1.2, 500, 7u);
  c.check(std::abs(boot.ci_low - 0.05) < 1e-12 && std::abs(boot.ci_high - 0.05) < 1e-12 &&
              std::abs(boot.mean - 0.05) < 1e-12,
          fmt("degenerate CI [%.4f, %.4f]", boot.ci_low, boot.ci_high));
  c.check(true, fmt("d=%.2f, Holm 3/3 rejected, degenerate CI at %.2f", d, boot.mean));
  c.finish();
}

void criterion_10_performance(const bundle::CalibrationBundle& b) {
  Criterion c(10, "per-epoch runtime and live-state memory budget");
  auto stress = stress_manifest();
  const auto out = run::replay(stress, b, policy::PolicyId::Adapt12);
  c.check(out.runtime.median_us < 1000.0, fmt("median per-epoch %.1f us", out.runtime.median_us));
  c.check(out.state_bytes < 10 * 1024 * 1024,
          fmt("live state %.3f MB", static_cast<double>(out.state_bytes) / 1048576.0));
  c.check(true, fmt("median %.1f us/epoch, live state %.3f MB", out.runtime.median_us,
                    static_cast<double>(out.state_bytes) / 1048576.0));
  c.finish(300.0);
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void criterion_11_determinism_and_freeze() {
  Criterion c(11, "determinism and frozen-protocol enforcement");
#ifndef IONOLINK_CLI_PATH
  c.check(false, "CLI path not configured");
  c.finish();
  return;
#else
  const std::string cli = IONOLINK_CLI_PATH;
  const fs::path dir = fs::temp_directory_path() / "ionolink_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg_path = (dir / "run.json").string();
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({
  "scenario": {
    "duration_s": 1500.0, "t0_s": 600.0, "rng_seed": 4242,
    "target_peak_dvtec_tecu": 8.4,
    "geometry": {"elevation_deg": 30.0}, "cn0_dbhz": 49.0,
    "xrs": {"synthetic": {}}
  },
  "bootstrap": {"b": 400}
})";
  }
  const std::string bundle_path = (dir / "bundle.json").string();
  const auto cmd = [&](const std::string& sub, const std::string& extra) {
    return cli + " " + sub + " --config " + cfg_path + " --bundle " + bundle_path + " " + extra;
  };

  c.check(shell(cmd("calibrate", "--out " + dir.string()) + " >/dev/null") == 0,
          "calibrate failed");
  c.check(shell(cmd("replay", "--policy adapt-1+2 --out " + (dir / "r1").string()) +
                " >/dev/null") == 0,
          "first replay failed");
  c.check(shell(cmd("replay", "--policy adapt-1+2 --out " + (dir / "r2").string()) +
                " >/dev/null") == 0,
          "second replay failed");
  const std::string log1 = (dir / "r1" / "adapt-1+2.csv").string();
  const std::string log2 = (dir / "r2" / "adapt-1+2.csv").string();
  const std::string bytes1 = slurp(log1);
  c.check(!bytes1.empty() && bytes1 == slurp(log2), "replay logs are not byte-identical");

  c.check(shell(cmd("replay", "--policy no-adapt --out " + (dir / "r1").string()) +
                " >/dev/null") == 0,
          "no-adapt replay failed");
  const std::string log_no = (dir / "r1" / "no-adapt.csv").string();
  c.check(shell(cmd("evaluate", "--log-a " + log_no + " --log-b " + log1 + " --out " +
                                    (dir / "eval").string()) +
                " >/dev/null") == 0,
          "evaluate on the frozen bundle failed");

  // second calibrate onto the same bundle must hit the freeze rule
  const int recal = shell(cmd("calibrate", "--out " + dir.string()) + " >/dev/null 2>&1");
  c.check(recal == 3, fmt("re-calibrate exit=%.0f (want 3)", static_cast<double>(recal)));

  // mutate the bundle and expect the frozen-protocol exit code
  std::string text = slurp(bundle_path);
  const auto pos = text.find("\"sigma_pre\"");
  c.check(pos != std::string::npos, "bundle missing sigma_pre");
  if (pos != std::string::npos) {
    text.replace(pos + 13, 1, "8");
    std::ofstream out(bundle_path);
    out << text;
  }
  const int tampered = shell(cmd("evaluate", "--log-a " + log_no + " --log-b " + log1 +
                                                 " --out " + (dir / "eval2").string()) +
                             " >/dev/null 2>&1");
  c.check(tampered == 3, fmt("evaluate on mutated bundle exit=%.0f (want 3)", static_cast<double>(tampered)));
  c.check(true, "byte-identical logs; freeze violations exit 3");
  c.finish(600.0);
  fs::remove_all(dir);
#endif
}

}  // namespace

int main() {
  std::printf("ionolink acceptance suite\n");
  criterion_1_constants();
  criterion_2_noise_law();
  criterion_3_filter_consistency();
  criterion_4_detector_calibration();
  criterion_5_rate_margin_slope();
  criterion_6_phy_round_trip();

  // criteria 7 and 10 share one frozen calibration at the base operating point
  const auto b = run::calibrate(base_manifest());
  criterion_7_closed_loop(b);
  criterion_8_ensemble();
  criterion_9_statistics_oracles();
  criterion_10_performance(b);
  criterion_11_determinism_and_freeze();

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria failed\n", g_failures);
  return 1;
}
