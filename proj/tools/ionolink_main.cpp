#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ionolink/orchestrator.hpp"
#include "ionolink/orchestrator_export.hpp"

namespace {

using ionolink::Errc;
using ionolink::Error;
namespace run = ionolink::run;

run::RunManifest manifest_for(const std::string& config_path, std::uint64_t seed,
                              bool seed_given) {
  run::RunManifest m =
      config_path.empty() ? run::default_manifest() : run::load_manifest(config_path);
  if (seed_given) m.scenario.rng_seed = seed;
  return m;
}

void print_runtime(const run::ReplayOutput& out) {
  std::printf("epochs: %zu\n", out.runtime.epochs);
  std::printf("per-epoch cost: median %.3f us, mean %.3f us, max %.3f us\n", out.runtime.median_us,
              out.runtime.mean_us, out.runtime.max_us);
  std::printf("live state: %.3f MB\n", static_cast<double>(out.state_bytes) / (1024.0 * 1024.0));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ionolink: flare-driven Ka-band link sensing, risk forecasting and MCS control"};
  app.require_subcommand(1);

  std::string config_path, bundle_path, out_dir = ".", policy_name = "adapt-1+2";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::vector<double> gates, tau_hp;

  auto add_common = [&](CLI::App* cmd, bool need_bundle) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    auto* b = cmd->add_option("--bundle", bundle_path, "calibration bundle path");
    if (need_bundle) b->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override the scenario RNG seed")
        ->each([&](const std::string&) { seed_given = true; });
  };

  auto* c_cal = app.add_subcommand("calibrate", "freeze thresholds, anchor and offset");
  add_common(c_cal, true);

  auto* c_syn = app.add_subcommand("synthesize", "emit a scenario trace CSV");
  add_common(c_syn, false);
  std::string xrs_cache;
  c_syn->add_option("--xrs-cache", xrs_cache, "also write the canonical XRS cache CSV");

  auto* c_rep = app.add_subcommand("replay", "run one policy over a scenario");
  add_common(c_rep, true);
  c_rep->add_option("--policy", policy_name, "policy name (see README)");

  auto* c_eval = app.add_subcommand("evaluate", "paired statistics for two replay logs");
  add_common(c_eval, true);
  std::string log_a, log_b;
  c_eval->add_option("--log-a", log_a, "reference log (e.g. no-adapt)")->required();
  c_eval->add_option("--log-b", log_b, "comparison log (e.g. adapt-1+2)")->required();
  c_eval->add_option("--gates", gates, "outage gates for the secondary analyses");

  auto* c_ens = app.add_subcommand("ensemble", "cross-product sweep table");
  add_common(c_ens, false);
  c_ens->add_option("--tau-hp", tau_hp, "high-pass constants to ablate");

  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);

    if (c_cal->parsed()) {
      const auto m = manifest_for(config_path, seed, seed_given);
      run::cmd_calibrate(m, bundle_path);
      std::printf("bundle written: %s\n", bundle_path.c_str());
      return 0;
    }

    if (c_syn->parsed()) {
      const auto m = manifest_for(config_path, seed, seed_given);
      if (!xrs_cache.empty() && m.drive.kind != run::DriveSpec::Kind::None) {
        const auto series = m.drive.kind == run::DriveSpec::Kind::File
                                ? ionolink::xrs::parse_xrs_file(m.drive.file, m.drive.format)
                                : ionolink::synth::synthesize_xrs(m.drive.flare);
        ionolink::xrs::serialize_xrs(series, xrs_cache);
      }
      const auto drive = run::resolve_drive(m);
      if (drive.gap_minutes > 0)
        std::fprintf(stderr, "warning: %zu missing minutes treated as zero drive\n",
                     drive.gap_minutes);
      const auto trace = ionolink::synth::synthesize_trace(drive.dvtec, m.scenario,
                                                           drive.onset_offset_s);
      const auto slips = ionolink::synth::check_cycle_slip(trace);
      if (!slips.empty())
        std::fprintf(stderr, "warning: %zu cycle-slip guard violations (first at %.1f s)\n",
                     slips.size(), trace[slips.front()].t_s);
      const std::string path = out_dir + "/trace.csv";
      run::write_trace_csv(trace, path);
      std::printf("trace written: %s (%zu epochs, drive peak %.3f TECU)\n", path.c_str(),
                  trace.size(), drive.peak_tecu);
      return 0;
    }

    if (c_rep->parsed()) {
      const auto m = manifest_for(config_path, seed, seed_given);
      const std::string path = out_dir + "/" + policy_name + ".csv";
      const auto out = run::cmd_replay(m, bundle_path, policy_name, path);
      std::printf("log written: %s\n", path.c_str());
      print_runtime(out);
      return 0;
    }

    if (c_eval->parsed()) {
      auto m = manifest_for(config_path, seed, seed_given);
      if (!gates.empty()) m.gates = gates;
      const auto res = run::cmd_evaluate(m, bundle_path, log_a, log_b, out_dir);
      std::printf("results written: %s/results.csv, %s/worst_window.csv\n", out_dir.c_str(),
                  out_dir.c_str());
      for (const auto& r : res.rows)
        std::printf("%-6s gate=%-5s n=%-7zu mean=%+.5g ci=[%+.5g,%+.5g] p=%.4g holm=%s\n",
                    r.metric.c_str(), r.gate.c_str(), r.n, r.boot.mean, r.boot.ci_low,
                    r.boot.ci_high, r.boot.p_value,
                    r.gate == "full" ? "-" : (r.reject_holm ? "reject" : "keep"));
      return 0;
    }

    if (c_ens->parsed()) {
      auto m = manifest_for(config_path, seed, seed_given);
      if (!tau_hp.empty()) m.ensemble_tau_hp_s = tau_hp;
      const ionolink::bundle::CalibrationBundle* preloaded = nullptr;
      ionolink::bundle::CalibrationBundle loaded;
      if (!bundle_path.empty()) {
        loaded = ionolink::bundle::load_bundle(bundle_path);
        preloaded = &loaded;
      }
      const auto rows = run::ensemble(m, 0.3, preloaded);
      const std::string path = out_dir + "/ensemble.csv";
      run::write_ensemble_csv(rows, path);
      std::printf("ensemble written: %s (%zu rows)\n", path.c_str(), rows.size());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
  return 0;
}
