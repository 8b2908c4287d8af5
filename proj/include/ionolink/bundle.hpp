#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "ionolink/detect.hpp"
#include "ionolink/errors.hpp"
#include "ionolink/phy.hpp"
#include "ionolink/risk.hpp"

namespace ionolink::bundle {

using nlohmann::json;

/// Everything locked by the calibration run and reused verbatim by every
/// evaluation: detector front-end settings and threshold, the BLER anchor,
/// the margin model (including the outage baseline c) and the MCS ladder.
struct CalibrationBundle {
  detect::DetectorConfig detector{};
  detect::CalibrationRecord record{};
  phy::BlerAnchor anchor{};
  risk::MarginModel margin{};
  phy::McsLadder ladder = phy::McsLadder::defaults();
  double dt_s = 0.1;
  std::uint64_t noevent_seed = 0;
  std::uint64_t event_seed = 0;

  void require_frozen() const {
    require(record.frozen && anchor.frozen && margin.c_frozen, Errc::InvalidConfig,
            "bundle is not fully frozen");
  }
};

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace internal {

inline json to_json(const CalibrationBundle& b) {
  json j;
  j["dt_s"] = b.dt_s;
  j["noevent_seed"] = b.noevent_seed;
  j["event_seed"] = b.event_seed;
  j["detector"] = {{"tau_hp_s", b.detector.tau_hp_s},
                   {"window_s", b.detector.window_s},
                   {"alpha_fa", b.detector.alpha_fa},
                   {"z_hi", b.detector.z_hi},
                   {"z_lo", b.detector.z_lo},
                   {"template_rise_s", b.detector.template_rise_s},
                   {"template_decay_s", b.detector.template_decay_s}};
  j["calibration_record"] = {{"sigma_pre", b.record.sigma_pre},
                             {"block_maxima", b.record.block_maxima},
                             {"gumbel_mu", b.record.gumbel_mu},
                             {"gumbel_beta", b.record.gumbel_beta},
                             {"threshold", b.record.threshold},
                             {"gumbel_extrapolated", b.record.gumbel_extrapolated}};
  j["anchor"] = {{"k_slope", b.anchor.k_slope},
                 {"m_piv_db", b.anchor.m_piv_db},
                 {"bler_min", b.anchor.bler_min},
                 {"bler_max", b.anchor.bler_max}};
  j["margin"] = {{"m0_db", b.margin.m0_db},
                 {"k1_db_per_tecu", b.margin.k1_db_per_tecu},
                 {"k2_db_per_tecu_s", b.margin.k2_db_per_tecu_s},
                 {"rho", b.margin.rho},
                 {"gamma0_db", b.margin.gamma0_db},
                 {"c_offset_db", b.margin.c_offset_db}};
  json entries = json::array();
  for (const auto& e : b.ladder.entries)
    entries.push_back({{"index", e.index},
                       {"modulation", e.modulation},
                       {"code_rate", e.code_rate},
                       {"r_bpshz", e.r_bpshz}});
  j["ladder"] = {{"k_r", b.ladder.k_r}, {"entries", entries}};
  return j;
}

inline CalibrationBundle from_json(const json& j) {
  CalibrationBundle b;
  b.dt_s = j.at("dt_s").get<double>();
  b.noevent_seed = j.at("noevent_seed").get<std::uint64_t>();
  b.event_seed = j.at("event_seed").get<std::uint64_t>();
  const auto& d = j.at("detector");
  b.detector.tau_hp_s = d.at("tau_hp_s").get<double>();
  b.detector.window_s = d.at("window_s").get<double>();
  b.detector.alpha_fa = d.at("alpha_fa").get<double>();
  b.detector.z_hi = d.at("z_hi").get<double>();
  b.detector.z_lo = d.at("z_lo").get<double>();
  b.detector.template_rise_s = d.at("template_rise_s").get<double>();
  b.detector.template_decay_s = d.at("template_decay_s").get<double>();
  const auto& r = j.at("calibration_record");
  b.record.sigma_pre = r.at("sigma_pre").get<double>();
  b.record.block_maxima = r.at("block_maxima").get<std::vector<double>>();
  b.record.gumbel_mu = r.at("gumbel_mu").get<double>();
  b.record.gumbel_beta = r.at("gumbel_beta").get<double>();
  b.record.threshold = r.at("threshold").get<double>();
  b.record.gumbel_extrapolated = r.at("gumbel_extrapolated").get<bool>();
  b.record.frozen = true;
  const auto& a = j.at("anchor");
  b.anchor.k_slope = a.at("k_slope").get<double>();
  b.anchor.m_piv_db = a.at("m_piv_db").get<double>();
  b.anchor.bler_min = a.at("bler_min").get<double>();
  b.anchor.bler_max = a.at("bler_max").get<double>();
  b.anchor.frozen = true;
  const auto& m = j.at("margin");
  b.margin.m0_db = m.at("m0_db").get<double>();
  b.margin.k1_db_per_tecu = m.at("k1_db_per_tecu").get<double>();
  b.margin.k2_db_per_tecu_s = m.at("k2_db_per_tecu_s").get<double>();
  b.margin.rho = m.at("rho").get<double>();
  b.margin.gamma0_db = m.at("gamma0_db").get<double>();
  b.margin.c_offset_db = m.at("c_offset_db").get<double>();
  b.margin.c_frozen = true;
  const auto& l = j.at("ladder");
  b.ladder.k_r = l.at("k_r").get<double>();
  b.ladder.entries.clear();
  for (const auto& e : l.at("entries"))
    b.ladder.entries.push_back({e.at("index").get<int>(), e.at("modulation").get<std::string>(),
                                e.at("code_rate").get<std::string>(),
                                e.at("r_bpshz").get<double>()});
  return b;
}

}  // namespace internal

/// Content hash over the canonical (compact, key-sorted) serialization,
/// excluding the hash field itself.
inline std::string content_hash(const json& without_hash) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(fnv1a64(without_hash.dump())));
  return buf;
}

/// Write a frozen bundle. Refuses to overwrite: a bundle is calibrated once.
inline void save_bundle(const CalibrationBundle& b, const std::string& path) {
  b.require_frozen();
  require(!std::filesystem::exists(path), Errc::BundleExists,
          "bundle '" + path + "' already exists; calibration is one-time");
  json j = internal::to_json(b);
  j["content_hash"] = content_hash(j);
  std::ofstream out(path);
  require(out.good(), Errc::InvalidConfig, "cannot write bundle '" + path + "'");
  out << j.dump(2) << "\n";
}

/// Load a bundle and verify its embedded content hash; any post-calibration
/// edit aborts with the frozen-protocol error.
inline CalibrationBundle load_bundle(const std::string& path) {
  require(std::filesystem::exists(path), Errc::MissingBundle, "bundle '" + path + "' not found");
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(Errc::BundleHashMismatch, std::string("bundle unreadable: ") + e.what());
  }
  require(j.contains("content_hash"), Errc::BundleHashMismatch, "bundle lacks a content hash");
  const std::string stored = j.at("content_hash").get<std::string>();
  j.erase("content_hash");
  require(stored == content_hash(j), Errc::BundleHashMismatch,
          "bundle content hash mismatch: calibration was mutated after freezing");
  return internal::from_json(j);
}

}  // namespace ionolink::bundle
