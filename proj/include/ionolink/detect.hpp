#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "ionolink/errors.hpp"
#include "ionolink/numeric.hpp"

namespace ionolink::detect {

/// Front-end configuration: high-pass constant, template window/shape, and
/// the false-alarm target that drives threshold calibration.
struct DetectorConfig {
  double tau_hp_s = 200.0;
  double window_s = 200.0;
  double alpha_fa = 1e-3;
  double z_hi = 2.685;             // default trigger; replaced by the calibrated threshold
  double z_lo = 2.685 - 0.7;       // clear threshold (hysteresis)
  double template_rise_s = 30.0;
  double template_decay_s = 300.0;

  void validate() const {
    require(tau_hp_s > 0.0, Errc::InvalidConfig, "tau_hp_s must be > 0");
    require(window_s > 0.0, Errc::InvalidConfig, "window_s must be > 0");
    require(alpha_fa > 0.0 && alpha_fa < 0.5, Errc::InvalidConfig, "alpha_fa must be in (0, 0.5)");
    require(z_lo < z_hi, Errc::InvalidConfig, "z_lo must be below z_hi");
    require(template_rise_s > 0.0 && template_decay_s > 0.0, Errc::InvalidConfig,
            "template constants must be > 0");
  }

  [[nodiscard]] double hysteresis_gap() const { return z_hi - z_lo; }

  [[nodiscard]] std::size_t window_len(double dt_s) const {
    const double l = window_s / dt_s;
    const auto n = static_cast<std::size_t>(std::llround(l));
    require(std::abs(l - static_cast<double>(n)) < 1e-9 && n > 0, Errc::InvalidConfig,
            "window_s must be a positive multiple of dt");
    return n;
  }
};

/// First-order causal high-pass: u[k] = a (u[k-1] + y[k] - y[k-1]) with
/// a = tau/(tau + dt), zero initial state.
class HighPass {
 public:
  HighPass(double tau_s, double dt_s) : a_(tau_s / (tau_s + dt_s)) {
    require(tau_s > 0.0 && dt_s > 0.0, Errc::InvalidConfig, "tau and dt must be > 0");
  }

  double step(double y) {
    u_ = a_ * (u_ + y - y_prev_);
    y_prev_ = y;
    return u_;
  }

  void reset() { u_ = 0.0; y_prev_ = 0.0; }

 private:
  double a_;
  double u_ = 0.0;
  double y_prev_ = 0.0;
};

inline std::vector<double> highpass(std::span<const double> y, double tau_hp_s, double dt_s) {
  HighPass hp(tau_hp_s, dt_s);
  std::vector<double> out(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) out[k] = hp.step(y[k]);
  return out;
}

/// Causal zero-mean unit-energy flare template sampled on the dt grid:
/// g(t) = exp(-t/decay) - exp(-t/rise), then mean-removed and normalized to
/// unit energy. Fixed a priori; never refit on evaluation data.
inline std::vector<double> build_template(double window_s, double dt_s, double rise_s,
                                          double decay_s) {
  require(window_s > 0.0 && dt_s > 0.0, Errc::InvalidConfig, "window and dt must be > 0");
  require(rise_s < decay_s, Errc::DegenerateShape,
          "template rise must be shorter than decay (shape would vanish)");
  const auto n = static_cast<std::size_t>(std::llround(window_s / dt_s));
  require(n >= 2, Errc::InvalidConfig, "window too short for template");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt_s;
    g[k] = std::exp(-t / decay_s) - std::exp(-t / rise_s);
  }
  const double m = num::mean(g);
  double energy = 0.0;
  for (double& v : g) {
    v -= m;
    energy += v * v;
  }
  require(energy > 0.0, Errc::DegenerateShape, "template has zero energy");
  const double scale = 1.0 / std::sqrt(energy);
  for (double& v : g) v *= scale;
  return g;
}

/// Streaming causal correlation of the input against the trailing template
/// window: z[k] = sum_i u[k-L+1+i] g[i], with the pre-history zero-padded.
class MatchedFilter {
 public:
  explicit MatchedFilter(std::vector<double> tpl)
      : tpl_(std::move(tpl)), ring_(tpl_.size(), 0.0) {
    require(!tpl_.empty(), Errc::InvalidConfig, "empty template");
  }

  double step(double u) {
    ring_[head_] = u;
    head_ = (head_ + 1) % ring_.size();
    // ring_[head_] is now the oldest sample, matching template index 0
    double z = 0.0;
    std::size_t idx = head_;
    for (double g : tpl_) {
      z += ring_[idx] * g;
      idx = (idx + 1) % ring_.size();
    }
    return z;
  }

  [[nodiscard]] std::size_t length() const { return tpl_.size(); }

 private:
  std::vector<double> tpl_;
  std::vector<double> ring_;
  std::size_t head_ = 0;
};

/// Batch matched filter normalized by a pre-event standard deviation.
inline std::vector<double> matched_filter_norm(std::span<const double> u,
                                               const std::vector<double>& tpl, double sigma_pre) {
  require(sigma_pre > 0.0, Errc::InvalidConfig, "sigma_pre must be > 0");
  MatchedFilter mf(tpl);
  std::vector<double> z(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) z[k] = mf.step(u[k]) / sigma_pre;
  return z;
}

/// Moment fit of a Gumbel(mu, beta) to block maxima.
struct GumbelFit {
  double mu = 0.0;
  double beta = 1.0;
};

inline GumbelFit gumbel_fit_moments(std::span<const double> maxima) {
  require(maxima.size() >= 2, Errc::InsufficientData, "need at least 2 block maxima");
  constexpr double kEulerGamma = 0.57721566490153286;
  GumbelFit fit;
  fit.beta = num::sample_std(maxima) * std::sqrt(6.0) / std::numbers::pi;
  fit.mu = num::mean(maxima) - kEulerGamma * fit.beta;
  return fit;
}

/// Gumbel quantile at cumulative probability p: mu - beta ln(-ln p).
inline double gumbel_quantile(const GumbelFit& fit, double p) {
  require(p > 0.0 && p < 1.0, Errc::InvalidConfig, "quantile probability must be in (0,1)");
  return fit.mu - fit.beta * std::log(-std::log(p));
}

/// Frozen per-run detection calibration: pre-event matched-filter scale,
/// block maxima, the Gumbel fit and the operating threshold.
struct CalibrationRecord {
  double sigma_pre = 0.0;
  std::vector<double> block_maxima;
  double gumbel_mu = 0.0;
  double gumbel_beta = 0.0;
  double threshold = 0.0;
  bool gumbel_extrapolated = true;
  bool frozen = false;
};

/// Calibrate sigma_pre and the per-window threshold on the no-event
/// matched-filter output.
///
/// The raw output is split into non-overlapping blocks of L = window/dt
/// samples. The first L-1 samples of the log are the causal prefix (the
/// correlation window still overlaps the zero padding) and are excluded from
/// the sigma estimate and from the first block's maximum. The threshold is
/// the (1 - alpha) quantile of the block-max law: a moment-fit Gumbel
/// extrapolation when N_b * alpha < 1, the empirical order statistic
/// otherwise.
inline CalibrationRecord calibrate_threshold(std::span<const double> mf_output, double window_s,
                                             double dt_s, double alpha_fa) {
  DetectorConfig probe;
  probe.window_s = window_s;
  probe.alpha_fa = alpha_fa;
  probe.validate();
  const std::size_t block = probe.window_len(dt_s);
  const std::size_t n_blocks = mf_output.size() / block;
  require(n_blocks >= 8, Errc::InsufficientData,
          "calibration log shorter than 8 blocks");

  CalibrationRecord rec;
  std::vector<double> retained;
  retained.reserve(mf_output.size());
  for (std::size_t k = block - 1; k < mf_output.size(); ++k) retained.push_back(mf_output[k]);
  rec.sigma_pre = num::sample_std(retained);
  require(rec.sigma_pre > 0.0, Errc::InsufficientData, "degenerate calibration log");

  rec.block_maxima.resize(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = b * block + (b == 0 ? block - 1 : 0);
    const std::size_t end = (b + 1) * block;
    double mx = mf_output[begin] / rec.sigma_pre;
    for (std::size_t k = begin; k < end; ++k) mx = std::max(mx, mf_output[k] / rec.sigma_pre);
    rec.block_maxima[b] = mx;
  }

  const GumbelFit fit = gumbel_fit_moments(rec.block_maxima);
  rec.gumbel_mu = fit.mu;
  rec.gumbel_beta = fit.beta;
  rec.gumbel_extrapolated = static_cast<double>(n_blocks) * alpha_fa < 1.0;
  if (rec.gumbel_extrapolated) {
    rec.threshold = gumbel_quantile(fit, 1.0 - alpha_fa);
  } else {
    std::vector<double> sorted = rec.block_maxima;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = std::min(sorted.size() - 1,
                              static_cast<std::size_t>(std::ceil((1.0 - alpha_fa) *
                                                                 static_cast<double>(sorted.size())) -
                                                       1));
    rec.threshold = sorted[idx];
  }
  rec.frozen = true;
  return rec;
}

/// Refill an existing record; rejected once frozen (frozen-protocol rule).
inline void calibrate_threshold(CalibrationRecord& rec, std::span<const double> mf_output,
                                double window_s, double dt_s, double alpha_fa) {
  require(!rec.frozen, Errc::AlreadyFrozen, "calibration record is frozen");
  rec = calibrate_threshold(mf_output, window_s, dt_s, alpha_fa);
}

/// Two-threshold latch: trigger on a rising crossing of `trigger`, clear only
/// below `clear`.
class HysteresisLatch {
 public:
  HysteresisLatch(double trigger, double clear) : trigger_(trigger), clear_(clear) {
    require(clear < trigger, Errc::InvalidConfig, "clear threshold must be below trigger");
  }

  bool step(double z) {
    const bool rising_cross = z >= trigger_ && prev_ < trigger_;
    if (!detected_ && rising_cross) detected_ = true;
    if (detected_ && z < clear_) detected_ = false;
    prev_ = z;
    return detected_;
  }

  [[nodiscard]] bool detected() const { return detected_; }

 private:
  double trigger_;
  double clear_;
  double prev_ = -std::numeric_limits<double>::infinity();
  bool detected_ = false;
};

struct DetectionResult {
  std::vector<char> detected;        // per-epoch latch state
  std::optional<double> ttfa_s;      // first post-t0 rising crossing minus t0
};

/// Run the hysteretic detector over a normalized matched-filter sequence.
/// The trigger is the frozen calibrated threshold; the clear level sits one
/// hysteresis gap below it.
inline DetectionResult detect(std::span<const double> z_norm, const CalibrationRecord& cal,
                              const DetectorConfig& cfg, double t0_s, double dt_s) {
  require(cal.frozen, Errc::InvalidConfig, "detection requires a frozen calibration record");
  cfg.validate();
  const double trigger = cal.threshold;
  HysteresisLatch latch(trigger, trigger - cfg.hysteresis_gap());
  DetectionResult res;
  res.detected.resize(z_norm.size());
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < z_norm.size(); ++k) {
    const double t = static_cast<double>(k) * dt_s;
    const bool rising_cross = z_norm[k] >= trigger && prev < trigger;
    if (!res.ttfa_s && rising_cross && t >= t0_s) res.ttfa_s = t - t0_s;
    prev = z_norm[k];
    res.detected[k] = latch.step(z_norm[k]) ? 1 : 0;
  }
  return res;
}

}  // namespace ionolink::detect
