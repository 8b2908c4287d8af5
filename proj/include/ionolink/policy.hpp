#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "ionolink/errors.hpp"
#include "ionolink/estimator.hpp"
#include "ionolink/phy.hpp"
#include "ionolink/risk.hpp"

namespace ionolink::policy {

enum class EtaMode { Fixed, SharedLaw };

/// Controller knobs shared by the risk-gated policy and every baseline.
struct ControlConfig {
  double eta_min = 0.15;
  double eta_max = 0.30;
  double eta0 = 0.15;             // constant pilot fraction under EtaMode::Fixed
  EtaMode eta_mode = EtaMode::Fixed;
  double m_sat_db = 3.0;
  double dwell_min_s = 10.0;
  double z_hi = 2.685;            // trigger; orchestrator overwrites with the frozen threshold
  double z_lo = 2.685 - 0.7;
  double tau_gate = 0.3;
  double horizon_s = 60.0;
  double delta_m_db = 0.5;        // adapt-1 softening shift
  double slope_window_s = 1.0;    // z_norm slope lookback
  double ma_window_s = 10.0;      // smoothing for the reactive baselines
  double m_safe_db = 3.0;         // fixed-safety reserve
  double reactive_down_db = 0.0;
  double reactive_up_db = 1.0;
  double acm_enter_db = 0.0;      // reactive-ACM gate: enter at 0 dB
  double acm_exit_db = 1.0;       // exit at +1 dB
  double acm_hold_s = 45.0;       // minimum hold
  double beta = 0.10;             // target BLER for the prediction-only gate

  void validate() const {
    require(eta_min >= 0.0 && eta_min <= eta_max && eta_max <= 1.0, Errc::InvalidConfig,
            "pilot fractions must satisfy 0 <= eta_min <= eta_max <= 1");
    require(dwell_min_s >= 0.0, Errc::InvalidConfig, "dwell must be non-negative");
    require(tau_gate > 0.0 && tau_gate < 1.0, Errc::InvalidConfig, "tau_gate must be in (0,1)");
    require(z_lo < z_hi, Errc::InvalidConfig, "z_lo must be below z_hi");
    require(horizon_s > 0.0, Errc::InvalidConfig, "horizon must be > 0");
  }
};

/// Sensing-driven required margin at the current epoch:
/// m0 + k1 [dVTEC]+ + k2 |rate| + uncertainty penalty on the posterior P11.
inline double required_margin_now(const kf::FilterState& state, double k_eff,
                                  const risk::MarginModel& model) {
  const double level = state.x_hat[0] > 0.0 ? state.x_hat[0] : 0.0;
  const double rate = std::abs(state.x_hat[1]);
  const double p11 = std::max(0.0, state.p[0][0]);
  return model.m0_db + model.k1_db_per_tecu * level + model.k2_db_per_tecu_s * rate +
         risk::uncertainty_penalty(p11, k_eff, model);
}

struct RateSchedule {
  double r_continuous = 0.0;
  double r_quantized = 0.0;
  int mcs_index = 0;
  std::size_t ladder_pos = 0;
};

/// Clipped linear rate law r = [r_max - k_r m_req] then floor quantization to
/// the largest ladder rate not above it (bottom rung when below r_min).
inline RateSchedule schedule_rate(double m_req_db, const phy::McsLadder& ladder) {
  ladder.validate();
  require(std::isfinite(m_req_db), Errc::InvalidConfig, "m_req must be finite");
  RateSchedule out;
  out.r_continuous =
      std::clamp(ladder.r_max() - ladder.k_r * m_req_db, ladder.r_min(), ladder.r_max());
  out.ladder_pos = 0;
  for (std::size_t i = 0; i < ladder.size(); ++i)
    if (ladder.entries[i].r_bpshz <= out.r_continuous + 1e-12) out.ladder_pos = i;
  out.r_quantized = ladder.entries[out.ladder_pos].r_bpshz;
  out.mcs_index = ladder.entries[out.ladder_pos].index;
  return out;
}

/// Saturating pilot-time law eta = eta_min + m/(m + m_sat) (eta_max - eta_min);
/// negative required margin is treated as zero.
inline double pilot_fraction(double m_req_db, const ControlConfig& cfg) {
  cfg.validate();
  const double m = m_req_db > 0.0 ? m_req_db : 0.0;
  return cfg.eta_min + m / (m + cfg.m_sat_db) * (cfg.eta_max - cfg.eta_min);
}

/// Discrete MCS state machine: at most one ladder step per transition and a
/// minimum dwell between transitions. A down-switch fires on a rising
/// above-threshold detection statistic together with the outage gate; the
/// up-switch (recovery) fires once the statistic clears the hysteresis low
/// level, never rising above `candidate_pos` (the unstressed operating
/// point).
class McsStateMachine {
 public:
  McsStateMachine(std::size_t initial_pos, const ControlConfig& cfg)
      : pos_(initial_pos), cfg_(cfg) {
    cfg_.validate();
    last_transition_t_ = -std::numeric_limits<double>::infinity();
  }

  std::size_t step(std::size_t candidate_pos, double z_norm, double z_slope, double p_out,
                   double t_s) {
    const bool dwell_ok = t_s - last_transition_t_ >= cfg_.dwell_min_s;
    if (dwell_ok && pos_ > 0 && z_norm >= cfg_.z_hi && z_slope > 0.0 && p_out > cfg_.tau_gate) {
      --pos_;
      last_transition_t_ = t_s;
    } else if (dwell_ok && pos_ < candidate_pos && z_norm < cfg_.z_lo) {
      ++pos_;
      last_transition_t_ = t_s;
    }
    return pos_;
  }

  [[nodiscard]] std::size_t position() const { return pos_; }
  [[nodiscard]] double last_transition_time() const { return last_transition_t_; }

 private:
  std::size_t pos_;
  ControlConfig cfg_;
  double last_transition_t_;
};

enum class PolicyId {
  NoAdapt,
  Adapt1,
  Adapt12,
  ReactiveAverage,
  FixedSafety,
  ReactiveAcm,
  PredictionOnly,
};

inline const std::vector<std::string>& all_policy_names() {
  static const std::vector<std::string> names = {
      "no-adapt",     "adapt-1",      "adapt-1+2",      "reactive-average",
      "fixed-safety", "reactive-acm", "prediction-only"};
  return names;
}

inline PolicyId policy_from_name(const std::string& name) {
  if (name == "no-adapt") return PolicyId::NoAdapt;
  if (name == "adapt-1") return PolicyId::Adapt1;
  if (name == "adapt-1+2") return PolicyId::Adapt12;
  if (name == "reactive-average") return PolicyId::ReactiveAverage;
  if (name == "fixed-safety") return PolicyId::FixedSafety;
  if (name == "reactive-acm") return PolicyId::ReactiveAcm;
  if (name == "prediction-only") return PolicyId::PredictionOnly;
  raise(Errc::UnknownPolicy, "unknown policy '" + name + "'");
}

inline const char* policy_name(PolicyId id) {
  switch (id) {
    case PolicyId::NoAdapt: return "no-adapt";
    case PolicyId::Adapt1: return "adapt-1";
    case PolicyId::Adapt12: return "adapt-1+2";
    case PolicyId::ReactiveAverage: return "reactive-average";
    case PolicyId::FixedSafety: return "fixed-safety";
    case PolicyId::ReactiveAcm: return "reactive-acm";
    case PolicyId::PredictionOnly: return "prediction-only";
  }
  return "?";
}

/// Per-epoch decision in effect for scoring.
struct PolicyDecision {
  int mcs_index = 4;
  double r_bpshz = 5.0;
  double eta = 0.15;
  bool gated = false;     // detected AND p_out above the gate this epoch
  bool detected = false;
  bool softened = false;  // adapt policies: BLER scored at m_eff + delta_m
  double m_req_db = 0.0;
  double p_out = 0.0;
};

/// Signals shared by every policy at one epoch.
struct PolicyInputs {
  double t_s = 0.0;
  double z_norm = 0.0;
  double z_slope = 0.0;      // 1 s finite difference of z_norm, per second
  bool detected = false;
  double m_req_now_db = 0.0;
  double mu_req_h_db = 0.0;  // risk-branch horizon forecast
  double sigma_req_h_db = 0.0;
  double u_abs_diff = 0.0;   // |HPF increment| for the prediction-only slope proxy
  double eta = 0.15;         // shared pilot fraction this epoch
};

namespace internal {

/// Fixed-length moving average over the last `window` pushes.
class MovingAverage {
 public:
  explicit MovingAverage(std::size_t window) : window_(std::max<std::size_t>(window, 1)) {}

  double push(double v) {
    buf_.push_back(v);
    sum_ += v;
    if (buf_.size() > window_) {
      sum_ -= buf_.front();
      buf_.pop_front();
    }
    return sum_ / static_cast<double>(buf_.size());
  }

 private:
  std::size_t window_;
  std::deque<double> buf_;
  double sum_ = 0.0;
};

}  // namespace internal

/// One policy instance driving one replay; owns its discrete state.
///
/// Decisions follow the one-slot actuation convention: the rate reported for
/// epoch k is the state decided at k-1, and epoch-k signals update the state
/// for the next epoch.
class PolicyRuntime {
 public:
  PolicyRuntime(PolicyId id, const ControlConfig& cfg, const phy::McsLadder& ladder,
                const risk::MarginModel& model, const phy::BlerAnchor& anchor, double dt_s)
      : id_(id),
        cfg_(cfg),
        ladder_(ladder),
        model_(model),
        dt_s_(dt_s),
        base_pos_(ladder.position_of(5.0)),
        active_pos_(base_pos_),
        machine_(base_pos_, cfg),
        ma_margin_(window_samples(cfg.ma_window_s)),
        ma_z_(window_samples(cfg.ma_window_s)),
        ma_udiff_(window_samples(cfg.ma_window_s)) {
    cfg_.validate();
    ladder_.validate();
    require(dt_s > 0.0, Errc::InvalidConfig, "dt_s must be > 0");
    require(base_pos_ > 0, Errc::InvalidConfig, "ladder needs a rung below the base rate");
    m_beta_db_ = phy::margin_threshold(cfg.beta, anchor);
    last_transition_t_ = -std::numeric_limits<double>::infinity();
  }

  [[nodiscard]] PolicyId id() const { return id_; }

  /// Outage probability at this policy's operating point.
  [[nodiscard]] double outage_at_active_rate(double mu_req_h_db, double sigma_req_h_db) const {
    const double m_avail =
        phy::available_extra_margin(ladder_.entries[active_pos_].r_bpshz, ladder_);
    return risk::endpoint_outage(mu_req_h_db, sigma_req_h_db, m_avail, model_);
  }

  PolicyDecision step(const PolicyInputs& in) {
    const double p_out = outage_at_active_rate(in.mu_req_h_db, in.sigma_req_h_db);
    const bool gated = in.detected && p_out > cfg_.tau_gate;

    PolicyDecision d;
    d.mcs_index = ladder_.entries[active_pos_].index;
    d.r_bpshz = ladder_.entries[active_pos_].r_bpshz;
    d.eta = in.eta;
    d.detected = in.detected;
    d.gated = gated;
    d.softened = (id_ == PolicyId::Adapt1 || id_ == PolicyId::Adapt12) && gated;
    d.m_req_db = in.m_req_now_db;
    d.p_out = p_out;

    update_state(in, p_out);
    return d;
  }

 private:
  [[nodiscard]] std::size_t window_samples(double window_s) const {
    return static_cast<std::size_t>(std::max(1.0, std::round(window_s / dt_s_)));
  }

  [[nodiscard]] double avail_active() const {
    return phy::available_extra_margin(ladder_.entries[active_pos_].r_bpshz, ladder_);
  }

  void update_state(const PolicyInputs& in, double p_out) {
    switch (id_) {
      case PolicyId::NoAdapt:
      case PolicyId::Adapt1:
        break;  // rate pinned to the base rung

      case PolicyId::Adapt12: {
        // single protective down-switch below the base rung, z-driven per the
        // detection latch; recovery returns to the base rung
        const double p_eff = in.detected ? p_out : 0.0;
        active_pos_ = machine_.step(base_pos_, in.z_norm, in.z_slope, p_eff, in.t_s);
        break;
      }

      case PolicyId::ReactiveAverage: {
        const double ma = ma_margin_.push(avail_active() - in.m_req_now_db);
        const bool dwell_ok = in.t_s - last_transition_t_ >= cfg_.dwell_min_s;
        if (dwell_ok && ma < cfg_.reactive_down_db && active_pos_ > 0) {
          --active_pos_;
          last_transition_t_ = in.t_s;
        } else if (dwell_ok && ma > cfg_.reactive_up_db && active_pos_ < base_pos_) {
          ++active_pos_;
          last_transition_t_ = in.t_s;
        }
        break;
      }

      case PolicyId::FixedSafety: {
        const auto sched = schedule_rate(in.m_req_now_db + cfg_.m_safe_db, ladder_);
        active_pos_ = std::min(sched.ladder_pos, base_pos_);
        break;
      }

      case PolicyId::ReactiveAcm: {
        const double ma = ma_margin_.push(avail_active() - in.m_req_now_db);
        const bool hold_ok = in.t_s - last_transition_t_ >= cfg_.acm_hold_s;
        if (hold_ok && !protect_ && ma <= cfg_.acm_enter_db) {
          protect_ = true;
          last_transition_t_ = in.t_s;
        } else if (hold_ok && protect_ && ma >= cfg_.acm_exit_db) {
          protect_ = false;
          last_transition_t_ = in.t_s;
        }
        active_pos_ = protect_ ? base_pos_ - 1 : base_pos_;
        break;
      }

      case PolicyId::PredictionOnly: {
        const double z_ma = ma_z_.push(in.z_norm);
        z_ma_hist_.push_back(z_ma);
        if (z_ma_hist_.size() > window_samples(cfg_.slope_window_s) + 1) z_ma_hist_.pop_front();
        const double z_dot =
            z_ma_hist_.size() > 1 ? (z_ma_hist_.back() - z_ma_hist_.front()) / cfg_.slope_window_s
                                  : 0.0;
        const double s_h = ma_udiff_.push(in.u_abs_diff);
        const double z_h = z_ma + z_dot * cfg_.horizon_s;
        const double mu_req_h =
            model_.m0_db + model_.k1_db_per_tecu * z_h + model_.k2_db_per_tecu_s * s_h;
        const double mu_eff_h = avail_active() - mu_req_h;
        const bool hold_ok = in.t_s - last_transition_t_ >= cfg_.acm_hold_s;
        if (hold_ok && !protect_ && mu_eff_h < m_beta_db_) {
          protect_ = true;
          last_transition_t_ = in.t_s;
        } else if (hold_ok && protect_ && mu_eff_h >= m_beta_db_ + cfg_.acm_exit_db) {
          protect_ = false;
          last_transition_t_ = in.t_s;
        }
        active_pos_ = protect_ ? base_pos_ - 1 : base_pos_;
        break;
      }
    }
  }

  PolicyId id_;
  ControlConfig cfg_;
  phy::McsLadder ladder_;
  risk::MarginModel model_;
  double dt_s_;
  std::size_t base_pos_;
  std::size_t active_pos_;
  McsStateMachine machine_;
  internal::MovingAverage ma_margin_;
  internal::MovingAverage ma_z_;
  internal::MovingAverage ma_udiff_;
  std::deque<double> z_ma_hist_;
  double m_beta_db_ = 0.0;
  double last_transition_t_;
  bool protect_ = false;
};

}  // namespace ionolink::policy
