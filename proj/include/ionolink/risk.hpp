#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ionolink/errors.hpp"
#include "ionolink/numeric.hpp"

namespace ionolink::risk {

/// Required-margin model: offset/slopes from the defaults table plus the
/// outage-baseline constant c calibrated once on a pre-event interval.
struct MarginModel {
  double m0_db = 3.2;        // baseline required margin
  double k1_db_per_tecu = 1.2;
  double k2_db_per_tecu_s = 22.0;
  double rho = 1.0;          // uncertainty-penalty weight
  double gamma0_db = 13.0;   // operating SINR used by kappa_phi
  double c_offset_db = 0.0;
  bool c_frozen = false;

  void validate() const {
    require(k1_db_per_tecu >= 0.0 && k2_db_per_tecu_s >= 0.0, Errc::InvalidConfig,
            "margin slopes must be non-negative");
    require(rho >= 0.0, Errc::InvalidConfig, "rho must be non-negative");
  }

  [[nodiscard]] double kappa_phi() const { return rho * std::pow(10.0, gamma0_db / 10.0); }
};

/// Horizon-propagated required-margin forecast and the endpoint outage it implies.
struct RiskForecast {
  double mu_req_db = 0.0;
  double sigma_req_db = 0.0;
  double p_out = 0.0;
  double horizon_s = 0.0;
};

/// Phase-uncertainty penalty 10 log10(1 + kappa_phi K_eff^2 P11) in dB.
inline double uncertainty_penalty(double p11_tecu2, double k_eff, const MarginModel& model) {
  require(p11_tecu2 >= 0.0, Errc::InvalidConfig, "P11 must be non-negative");
  model.validate();
  return 10.0 * std::log10(1.0 + model.kappa_phi() * k_eff * k_eff * p11_tecu2);
}

struct MarginForecast {
  double mu_req_db = 0.0;
  double sigma_req_db = 0.0;
};

/// Map the horizon-propagated disturbance state to required-margin mean/std.
///
/// mu_req = m0 + k1 [mu1]+ + k2 |mu2| + penalty(P11 at horizon); the variance
/// linearizes through g = [k1 step(mu1); k2 sgn(mu2)] against the propagated
/// (level, rate) covariance.
inline MarginForecast required_margin_forecast(double mu1_tecu, double mu2_tecu_s,
                                               const double p_xixi[2][2],
                                               double k_eff, double p11_at_horizon,
                                               const MarginModel& model) {
  model.validate();
  const double rectified = mu1_tecu > 0.0 ? mu1_tecu : 0.0;
  const double penalty = uncertainty_penalty(p11_at_horizon, k_eff, model);
  MarginForecast out;
  out.mu_req_db = model.m0_db + model.k1_db_per_tecu * rectified +
                  model.k2_db_per_tecu_s * std::abs(mu2_tecu_s) + penalty;
  const double g1 = mu1_tecu > 0.0 ? model.k1_db_per_tecu : 0.0;
  const double g2 = mu2_tecu_s > 0.0   ? model.k2_db_per_tecu_s
                    : mu2_tecu_s < 0.0 ? -model.k2_db_per_tecu_s
                                       : 0.0;
  const double var = g1 * g1 * p_xixi[0][0] + 2.0 * g1 * g2 * p_xixi[0][1] +
                     g2 * g2 * p_xixi[1][1];
  out.sigma_req_db = var > 0.0 ? std::sqrt(var) : 0.0;
  return out;
}

/// Endpoint outage probability Phi((mu_req - m_avail - c)/sigma_req).
/// The sigma_req = 0 limit degenerates to a step indicator with ties at 0.5.
inline double endpoint_outage(double mu_req_db, double sigma_req_db, double m_avail_db,
                              const MarginModel& model) {
  require(sigma_req_db >= 0.0, Errc::InvalidConfig, "sigma_req must be non-negative");
  const double arg = mu_req_db - m_avail_db - model.c_offset_db;
  if (sigma_req_db == 0.0) {
    if (arg > 0.0) return 1.0;
    if (arg < 0.0) return 0.0;
    return 0.5;
  }
  return num::norm_cdf(arg / sigma_req_db);
}

/// Window-level probability from finely sampled endpoints (Dunn-Sidak style
/// complement product under weak dependence).
inline double window_outage(std::span<const double> p_endpoints) {
  require(!p_endpoints.empty(), Errc::InsufficientData, "window_outage needs endpoints");
  double survive = 1.0;
  for (double p : p_endpoints) {
    require(p >= 0.0 && p <= 1.0, Errc::InvalidConfig, "endpoint probability out of [0,1]");
    survive *= 1.0 - p;
  }
  return 1.0 - survive;
}

/// One pre-event forecast epoch used by the offset calibration.
struct PreEventForecast {
  double mu_req_db = 0.0;
  double sigma_req_db = 0.0;
  double m_avail_db = 0.0;
};

/// Solve for the baseline constant c so the mean pre-event endpoint outage
/// equals `target`, then freeze it. Bisection on [-60, 60] dB; the mean is
/// decreasing in c so the bracket test is exact.
inline double calibrate_offset_c(MarginModel& model,
                                 const std::vector<PreEventForecast>& preevent,
                                 double target = 0.10) {
  require(!model.c_frozen, Errc::AlreadyFrozen, "margin offset c is frozen");
  require(preevent.size() >= 100, Errc::InsufficientData,
          "offset calibration needs at least 100 pre-event epochs");
  require(target > 0.0 && target < 1.0, Errc::InvalidConfig, "target must be in (0,1)");

  const auto mean_pout = [&](double c) {
    MarginModel m = model;
    m.c_offset_db = c;
    double s = 0.0;
    for (const auto& f : preevent)
      s += endpoint_outage(f.mu_req_db, f.sigma_req_db, f.m_avail_db, m);
    return s / static_cast<double>(preevent.size());
  };

  double lo = -60.0, hi = 60.0;
  const double f_lo = mean_pout(lo) - target;  // c low -> outage high -> f_lo >= 0
  const double f_hi = mean_pout(hi) - target;
  require(f_lo >= 0.0 && f_hi <= 0.0, Errc::NoBracket,
          "target mean outage unreachable on c in [-60, 60] dB");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mean_pout(mid) - target >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double c = 0.5 * (lo + hi);
  require(std::abs(mean_pout(c) - target) <= 1e-6, Errc::NoBracket,
          "mean outage does not reach target (discontinuous objective)");
  model.c_offset_db = c;
  model.c_frozen = true;
  return c;
}

}  // namespace ionolink::risk
