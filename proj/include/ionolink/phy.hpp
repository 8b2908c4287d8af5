#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ionolink/errors.hpp"

namespace ionolink::phy {

struct McsEntry {
  int index = 0;               // ladder label (MCS-3/4/5)
  std::string modulation;      // e.g. "64QAM"
  std::string code_rate;       // e.g. "2/3"
  double r_bpshz = 0.0;        // scheduled spectral efficiency
};

/// Discrete MCS ladder plus the rate-margin slope k_r.
struct McsLadder {
  std::vector<McsEntry> entries;
  double k_r = 0.20;  // bps/Hz/dB

  static McsLadder defaults() {
    McsLadder l;
    l.entries = {{3, "16QAM", "3/4", 4.0}, {4, "64QAM", "2/3", 5.0}, {5, "64QAM", "5/6", 6.4}};
    l.k_r = 0.20;
    return l;
  }

  [[nodiscard]] double r_min() const { return entries.front().r_bpshz; }
  [[nodiscard]] double r_max() const { return entries.back().r_bpshz; }
  [[nodiscard]] std::size_t size() const { return entries.size(); }

  void validate() const {
    require(!entries.empty(), Errc::InvalidConfig, "ladder is empty");
    require(k_r > 0.0, Errc::InvalidConfig, "k_r must be > 0");
    for (std::size_t i = 1; i < entries.size(); ++i)
      require(entries[i].r_bpshz > entries[i - 1].r_bpshz, Errc::InvalidConfig,
              "ladder rates must be strictly ascending");
  }

  /// Ladder position (0-based) of a rate; throws RateNotOnLadder otherwise.
  [[nodiscard]] std::size_t position_of(double r_bpshz) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (std::abs(entries[i].r_bpshz - r_bpshz) < 1e-9) return i;
    raise(Errc::RateNotOnLadder, "rate " + std::to_string(r_bpshz) + " not on ladder");
  }
};

/// Headroom gained by scheduling below the top rate: (r_max - r)/k_r in dB.
inline double available_extra_margin(double r_bpshz, const McsLadder& ladder) {
  ladder.validate();
  (void)ladder.position_of(r_bpshz);
  return (ladder.r_max() - r_bpshz) / ladder.k_r;
}

/// Effective margin entering the BLER map; may be negative.
inline double effective_margin(double m_avail_db, double m_req_db) { return m_avail_db - m_req_db; }

/// Logistic BLER-margin anchor with fixed floor/ceiling. Slope and pivot are
/// learned once from a no-adapt calibration replay and then frozen for every
/// policy in a comparison.
struct BlerAnchor {
  double k_slope = 1.01;   // 1/dB
  double m_piv_db = 0.72;  // dB
  double bler_min = 0.0;
  double bler_max = 1.0;
  bool frozen = false;

  void validate() const {
    require(k_slope > 0.0, Errc::InvalidConfig, "anchor slope must be > 0");
    require(bler_min >= 0.0 && bler_min < bler_max && bler_max <= 1.0, Errc::InvalidConfig,
            "anchor floors must satisfy 0 <= bler_min < bler_max <= 1");
  }
};

/// BLER as a strictly decreasing logistic of effective margin.
inline double bler(double m_eff_db, const BlerAnchor& anchor) {
  anchor.validate();
  return anchor.bler_min + (anchor.bler_max - anchor.bler_min) /
                               (1.0 + std::exp(anchor.k_slope * (m_eff_db - anchor.m_piv_db)));
}

/// Margin needed to hit a target BLER beta; exact inverse of bler().
inline double margin_threshold(double beta, const BlerAnchor& anchor) {
  anchor.validate();
  require(beta > anchor.bler_min && beta < anchor.bler_max, Errc::BetaOutOfRange,
          "beta must lie strictly between the BLER floor and ceiling");
  return anchor.m_piv_db +
         std::log((anchor.bler_max - beta) / (beta - anchor.bler_min)) / anchor.k_slope;
}

/// Pilot- and error-discounted throughput (1-eta)(1-BLER) r.
inline double goodput(double eta, double bler_val, double r_bpshz) {
  require(eta >= 0.0 && eta <= 1.0, Errc::InvalidConfig, "eta must be in [0,1]");
  require(bler_val >= 0.0 && bler_val <= 1.0, Errc::InvalidConfig, "bler must be in [0,1]");
  return (1.0 - eta) * (1.0 - bler_val) * r_bpshz;
}

/// Sensitivity of spectral efficiency to margin at a linear operating SINR:
/// eta_e * ln(10)/(10 ln 2) * gamma0/(1+gamma0), in bps/Hz/dB.
inline double rate_margin_slope(double eta_e, double gamma0_linear) {
  require(gamma0_linear > 0.0, Errc::InvalidConfig, "gamma0 must be > 0");
  return eta_e * (std::numbers::ln10 / (10.0 * std::numbers::ln2)) * gamma0_linear /
         (1.0 + gamma0_linear);
}

/// One (m_eff, empirical BLER) observation used by the anchor fit.
struct BlerSample {
  double m_eff_db = 0.0;
  double bler = 0.0;
  double weight = 1.0;
};

/// One-time least-squares fit of (k, m_piv) with floors held fixed.
///
/// The fit linearizes through the logit transform and weights each pair by
/// weight * (p(1-p))^2, the delta-method variance factor, so saturated bins
/// do not dominate. Throws AlreadyFrozen on refit attempts and
/// PoorConditioning when the pairs do not span the logistic transition.
inline void fit_bler_anchor(BlerAnchor& anchor, const std::vector<BlerSample>& pairs) {
  require(!anchor.frozen, Errc::AlreadyFrozen, "BLER anchor is frozen");
  anchor.validate();
  require(pairs.size() >= 20, Errc::PoorConditioning, "need at least 20 calibration pairs");

  const double lo = anchor.bler_min;
  const double hi = anchor.bler_max;
  const double mid = 0.5 * (lo + hi);
  double m_min = pairs.front().m_eff_db, m_max = pairs.front().m_eff_db;
  bool below_mid = false, above_mid = false;
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (const auto& p : pairs) {
    m_min = std::min(m_min, p.m_eff_db);
    m_max = std::max(m_max, p.m_eff_db);
    if (p.bler < mid) below_mid = true;
    if (p.bler > mid) above_mid = true;
    // clamp into the open interval so the logit is finite
    const double eps = 1e-6 * (hi - lo);
    const double b = std::clamp(p.bler, lo + eps, hi - eps);
    const double u = (b - lo) / (hi - lo);
    const double y = std::log(u / (1.0 - u));
    const double w = p.weight * (u * (1.0 - u)) * (u * (1.0 - u));
    sw += w;
    swx += w * p.m_eff_db;
    swy += w * y;
    swxx += w * p.m_eff_db * p.m_eff_db;
    swxy += w * p.m_eff_db * y;
  }
  require(m_max - m_min > 1e-9, Errc::PoorConditioning, "calibration pairs share one m_eff");
  require(below_mid && above_mid, Errc::PoorConditioning,
          "calibration pairs do not span the logistic transition");
  const double det = sw * swxx - swx * swx;
  require(std::abs(det) > 1e-30, Errc::PoorConditioning, "rank-deficient anchor fit");
  const double slope = (sw * swxy - swx * swy) / det;
  const double intercept = (swy - slope * swx) / sw;
  // decreasing logistic: logit = -k (m - m_piv)
  require(slope < 0.0, Errc::PoorConditioning, "fitted BLER curve is not decreasing in margin");
  anchor.k_slope = -slope;
  anchor.m_piv_db = intercept / anchor.k_slope;
  anchor.frozen = true;
}

}  // namespace ionolink::phy
