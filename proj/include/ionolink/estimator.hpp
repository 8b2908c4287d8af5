#pragma once

#include <array>
#include <cmath>

#include "ionolink/errors.hpp"

namespace ionolink::kf {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 zero4() { return Mat4{}; }

inline Mat4 matmul(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      const double aik = a[i][k];
      if (aik == 0.0) continue;
      for (int j = 0; j < 4; ++j) c[i][j] += aik * b[k][j];
    }
  return c;
}

inline Mat4 transpose(const Mat4& a) {
  Mat4 t{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t[i][j] = a[j][i];
  return t;
}

/// Process spectral densities (continuous, per second) and the measurement
/// variance R from the C/N0 law.
struct NoiseConfig {
  double q1 = 4.9e-9;    // (7e-5)^2 TECU^2/s
  double q2 = 4.0e-8;    // (2e-4)^2 (TECU/s)^2/s
  double q3 = 4.0e-14;   // (2e-7)^2 rad^2/s
  double q4 = 2.5e-15;   // (5e-8)^2 (rad/s)^2/s
  double r_var = 6.31e-5;  // rad^2

  void validate() const {
    require(q1 > 0.0 && q2 > 0.0 && q3 > 0.0 && q4 > 0.0 && r_var > 0.0, Errc::InvalidConfig,
            "noise densities must be positive");
  }

  /// R = 1/((C/N0)_lin * dt) per the carrier-phase thermal-noise law.
  static double measurement_variance(double cn0_dbhz, double dt_s) {
    return 1.0 / (std::pow(10.0, cn0_dbhz / 10.0) * dt_s);
  }
};

/// Posterior state of the four-state nearly-constant-velocity filter:
/// [dVTEC (TECU), dVTEC rate (TECU/s), bias (rad), bias rate (rad/s)].
struct FilterState {
  Vec4 x_hat{};
  Mat4 p{};
  double last_nis = 0.0;
  double last_innovation_rad = 0.0;
  double last_innovation_var = 0.0;
};

/// Weakly informative default prior.
inline FilterState kf_init(double prior_dvtec_tecu = 0.0, double prior_var_scale = 1.0) {
  require(prior_var_scale > 0.0, Errc::InvalidConfig, "prior_var_scale must be > 0");
  FilterState s;
  s.x_hat = {prior_dvtec_tecu, 0.0, 0.0, 0.0};
  s.p = zero4();
  s.p[0][0] = 1.0 * prior_var_scale;       // 1 TECU^2
  s.p[1][1] = 1e-4 * prior_var_scale;      // (0.01 TECU/s)^2
  s.p[2][2] = 1e-4 * prior_var_scale;      // (0.01 rad)^2
  s.p[3][3] = 1e-8 * prior_var_scale;      // (1e-4 rad/s)^2
  return s;
}

/// One predict/update cycle on the pre-HPF GF observable.
///
/// Predict uses the block-diagonal CV transition with process covariance
/// Q dt; the scalar update is in Joseph form and the posterior covariance is
/// re-symmetrized. Innovation, innovation variance and NIS are recorded.
inline FilterState kf_step(const FilterState& state, double y_rad, double dt_s, double k_eff,
                           const NoiseConfig& noise) {
  require(dt_s > 0.0, Errc::InvalidConfig, "dt_s must be > 0");
  noise.validate();

  // predict
  Vec4 x{state.x_hat[0] + dt_s * state.x_hat[1], state.x_hat[1],
         state.x_hat[2] + dt_s * state.x_hat[3], state.x_hat[3]};
  Mat4 f{};
  for (int i = 0; i < 4; ++i) f[i][i] = 1.0;
  f[0][1] = dt_s;
  f[2][3] = dt_s;
  Mat4 p = matmul(matmul(f, state.p), transpose(f));
  p[0][0] += noise.q1 * dt_s;
  p[1][1] += noise.q2 * dt_s;
  p[2][2] += noise.q3 * dt_s;
  p[3][3] += noise.q4 * dt_s;

  // scalar update, h = [K_eff, 0, 1, 0]
  const Vec4 h{k_eff, 0.0, 1.0, 0.0};
  Vec4 ph{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) ph[i] += p[i][j] * h[j];
  double s_var = noise.r_var;
  for (int i = 0; i < 4; ++i) s_var += h[i] * ph[i];
  require(s_var > 0.0, Errc::NumericalBreakdown, "innovation variance not positive");

  const double nu = y_rad - (h[0] * x[0] + h[2] * x[2]);
  Vec4 gain{};
  for (int i = 0; i < 4; ++i) gain[i] = ph[i] / s_var;
  for (int i = 0; i < 4; ++i) x[i] += gain[i] * nu;

  // Joseph form: (I - K h') P (I - K h')' + K R K'
  Mat4 ikh{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) ikh[i][j] = (i == j ? 1.0 : 0.0) - gain[i] * h[j];
  Mat4 pj = matmul(matmul(ikh, p), transpose(ikh));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) pj[i][j] += gain[i] * noise.r_var * gain[j];
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const double sym = 0.5 * (pj[i][j] + pj[j][i]);
      pj[i][j] = sym;
      pj[j][i] = sym;
    }

  FilterState out;
  out.x_hat = x;
  out.p = pj;
  out.last_innovation_rad = nu;
  out.last_innovation_var = s_var;
  out.last_nis = nu * nu / s_var;
  return out;
}

/// PCRB-tight 95% half-width for the dVTEC state, 1.96 sqrt(P11).
inline double confidence_band(const FilterState& state) {
  const double p11 = state.p[0][0];
  require(p11 >= -1e-12, Errc::NumericalBreakdown, "negative dVTEC variance");
  return 1.96 * std::sqrt(p11 > 0.0 ? p11 : 0.0);
}

/// Mean and covariance of (dVTEC, rate) propagated over a horizon H.
struct HorizonForecast {
  double mu1_tecu = 0.0;
  double mu2_tecu_s = 0.0;
  double p_xixi[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
};

/// Closed-form CV propagation: mu' = [mu1 + mu2 H, mu2] and
/// P' = F_H P F_H' + Q_H with Q_H the accumulated CV process covariance
/// (Q11 = q1 H + q2 H^3/3, Q12 = q2 H^2/2, Q22 = q2 H). The accumulation has
/// the exact semigroup property, so chaining short horizons matches one long
/// horizon to machine precision.
inline HorizonForecast propagate_horizon(const FilterState& state, double horizon_s,
                                         const NoiseConfig& noise) {
  require(horizon_s > 0.0, Errc::InvalidConfig, "horizon must be > 0");
  const double h = horizon_s;
  HorizonForecast out;
  out.mu1_tecu = state.x_hat[0] + state.x_hat[1] * h;
  out.mu2_tecu_s = state.x_hat[1];
  const double p11 = state.p[0][0], p12 = state.p[0][1], p22 = state.p[1][1];
  out.p_xixi[0][0] = p11 + 2.0 * h * p12 + h * h * p22 + noise.q1 * h + noise.q2 * h * h * h / 3.0;
  out.p_xixi[0][1] = p12 + h * p22 + noise.q2 * h * h / 2.0;
  out.p_xixi[1][0] = out.p_xixi[0][1];
  out.p_xixi[1][1] = p22 + noise.q2 * h;
  return out;
}

}  // namespace ionolink::kf
