#pragma once

#include <cmath>
#include <numbers>

#include "ionolink/errors.hpp"

namespace ionolink::geo {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s, exact
inline constexpr double kIonoConstant = 40.3;           // refraction constant, SI
inline constexpr double kTecuElectronsPerM2 = 1e16;

constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Thin-shell link geometry and the dual-carrier pair.
///
/// Angles are accepted in degrees at the API boundary and converted to
/// radians internally.
struct GeometryConfig {
  double f1_hz = 20.2e9;
  double f2_hz = 19.7e9;
  double elevation_deg = 40.0;
  double shell_height_km = 350.0;
  double earth_radius_km = 6371.0;

  void validate() const {
    require(f1_hz > 0.0 && f2_hz > 0.0 && f1_hz != f2_hz, Errc::InvalidConfig,
            "carrier frequencies must be positive and distinct");
    require(elevation_deg > 0.0 && elevation_deg <= 90.0, Errc::InvalidConfig,
            "elevation_deg must be in (0, 90]");
    require(shell_height_km > 0.0, Errc::InvalidConfig, "shell_height_km must be > 0");
    require(earth_radius_km > 0.0, Errc::InvalidConfig, "earth_radius_km must be > 0");
  }
};

/// Slant-to-vertical thin-shell mapping M(eps) = 1/sqrt(1 - (R_E cos(eps)/(R_E+h_I))^2).
/// M(90 deg) = 1 exactly and M is strictly decreasing in elevation.
inline double mapping_factor(const GeometryConfig& cfg) {
  cfg.validate();
  const double a = cfg.earth_radius_km / (cfg.earth_radius_km + cfg.shell_height_km);
  const double c = std::cos(deg2rad(cfg.elevation_deg));
  return 1.0 / std::sqrt(1.0 - a * a * c * c);
}

/// dM/d(eps) in 1/rad: -a^2 sin(eps) cos(eps) / (1 - a^2 cos^2 eps)^(3/2).
inline double mapping_sensitivity(const GeometryConfig& cfg) {
  cfg.validate();
  const double a = cfg.earth_radius_km / (cfg.earth_radius_km + cfg.shell_height_km);
  const double eps = deg2rad(cfg.elevation_deg);
  const double c = std::cos(eps);
  const double s = std::sin(eps);
  const double den = 1.0 - a * a * c * c;
  return -(a * a * s * c) / (den * std::sqrt(den));
}

/// Geometry-free ionospheric coefficient in rad/TECU:
/// k_GF = -(2*pi*40.3*1e16/c) * (1/f1 - 1/f2). Positive when f1 > f2.
inline double gf_coefficient(const GeometryConfig& cfg) {
  cfg.validate();
  const double scale = 2.0 * std::numbers::pi * kIonoConstant * kTecuElectronsPerM2 / kSpeedOfLight;
  return -scale * (1.0 / cfg.f1_hz - 1.0 / cfg.f2_hz);
}

/// Effective observable gain K_eff = k_GF * M(eps), rad/TECU of vertical TEC.
inline double effective_gain(const GeometryConfig& cfg) {
  return gf_coefficient(cfg) * mapping_factor(cfg);
}

}  // namespace ionolink::geo
